//! TTP instances, tours, packing lists and the three objective functions.
//!
//! Cities are 0-based inside the library (city 0 is the start city and never
//! holds items). The text format and every exported artifact are 1-based.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};

/// Instances up to this many cities get a dense distance matrix.
const DENSE_DISTANCE_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EdgeWeightType {
    #[default]
    #[serde(rename = "CEIL_2D")]
    Ceil2d,
    #[serde(rename = "EUC_2D")]
    Euc2d,
}

impl EdgeWeightType {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeWeightType::Ceil2d => "CEIL_2D",
            EdgeWeightType::Euc2d => "EUC_2D",
        }
    }

    fn round(self, euclid: f64) -> f64 {
        match self {
            EdgeWeightType::Ceil2d => euclid.ceil(),
            // TSPLIB nint()
            EdgeWeightType::Euc2d => (euclid + 0.5).floor(),
        }
    }
}

impl FromStr for EdgeWeightType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CEIL_2D" => Ok(EdgeWeightType::Ceil2d),
            "EUC_2D" => Ok(EdgeWeightType::Euc2d),
            other => Err(format!("unsupported EDGE_WEIGHT_TYPE {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub profit: f64,
    pub weight: f64,
    /// 0-based home city, never 0.
    pub city: usize,
}

/// Plain field bag used to build a validated [`TtpInstance`].
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceData {
    pub name: String,
    pub knapsack_data_type: String,
    pub coords: Vec<(f64, f64)>,
    pub edge_weight_type: EdgeWeightType,
    pub items: Vec<Item>,
    pub capacity: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub renting_ratio: f64,
}

/// Immutable TTP problem definition.
#[derive(Debug, Clone)]
pub struct TtpInstance {
    data: InstanceData,
    items_at: Vec<Vec<usize>>,
    dense: Option<Vec<f64>>,
}

impl TryFrom<InstanceData> for TtpInstance {
    type Error = Error;

    fn try_from(data: InstanceData) -> Result<Self> {
        let n = data.coords.len();
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if n < 3 {
            return bad(format!("need at least 3 cities, got {n}"));
        }
        if data.items.is_empty() {
            return bad("need at least one item".into());
        }
        if data.capacity.is_nan() || data.capacity <= 0.0 {
            return bad(format!("capacity must be positive, got {}", data.capacity));
        }
        if !(data.min_speed > 0.0 && data.max_speed > data.min_speed) {
            return bad(format!(
                "speeds must satisfy max > min > 0, got min={} max={}",
                data.min_speed, data.max_speed
            ));
        }
        if data.renting_ratio.is_nan() || data.renting_ratio < 0.0 {
            return bad(format!("renting ratio must be >= 0, got {}", data.renting_ratio));
        }
        let mut items_at = vec![Vec::new(); n];
        for (j, item) in data.items.iter().enumerate() {
            if item.city == 0 || item.city >= n {
                return bad(format!(
                    "item {} assigned to city {}, expected 2..={n}",
                    j + 1,
                    item.city + 1
                ));
            }
            if !(item.profit >= 0.0 && item.weight >= 0.0) {
                return bad(format!("item {} has negative profit or weight", j + 1));
            }
            items_at[item.city].push(j);
        }
        let dense = (n <= DENSE_DISTANCE_LIMIT).then(|| {
            let mut d = vec![0.0; n * n];
            for u in 0..n {
                for v in (u + 1)..n {
                    let duv = raw_distance(&data.coords, data.edge_weight_type, u, v);
                    d[u * n + v] = duv;
                    d[v * n + u] = duv;
                }
            }
            d
        });
        Ok(TtpInstance { data, items_at, dense })
    }
}

fn raw_distance(coords: &[(f64, f64)], kind: EdgeWeightType, u: usize, v: usize) -> f64 {
    let (x1, y1) = coords[u];
    let (x2, y2) = coords[v];
    kind.round((x1 - x2).hypot(y1 - y2))
}

impl TtpInstance {
    pub fn name(&self) -> &str {
        &self.data.name
    }

    pub fn knapsack_data_type(&self) -> &str {
        &self.data.knapsack_data_type
    }

    pub fn num_cities(&self) -> usize {
        self.data.coords.len()
    }

    pub fn num_items(&self) -> usize {
        self.data.items.len()
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.data.coords
    }

    pub fn edge_weight_type(&self) -> EdgeWeightType {
        self.data.edge_weight_type
    }

    pub fn items(&self) -> &[Item] {
        &self.data.items
    }

    /// Item indices whose home is `city`.
    pub fn items_at(&self, city: usize) -> &[usize] {
        &self.items_at[city]
    }

    pub fn capacity(&self) -> f64 {
        self.data.capacity
    }

    pub fn min_speed(&self) -> f64 {
        self.data.min_speed
    }

    pub fn max_speed(&self) -> f64 {
        self.data.max_speed
    }

    pub fn renting_ratio(&self) -> f64 {
        self.data.renting_ratio
    }

    /// Speed loss per unit of carried weight.
    pub fn speed_coefficient(&self) -> f64 {
        (self.data.max_speed - self.data.min_speed) / self.data.capacity
    }

    pub fn data(&self) -> &InstanceData {
        &self.data
    }

    /// Rounded distance between two cities. Symmetric; zero when `u == v`.
    #[inline]
    pub fn distance(&self, u: usize, v: usize) -> f64 {
        match &self.dense {
            Some(d) => d[u * self.num_cities() + v],
            None => raw_distance(&self.data.coords, self.data.edge_weight_type, u, v),
        }
    }

    /// f(x): closed tour length.
    pub fn tour_length(&self, tour: &Tour) -> f64 {
        let c = tour.cities();
        let mut total = self.distance(c[c.len() - 1], c[0]);
        for w in c.windows(2) {
            total += self.distance(w[0], w[1]);
        }
        total
    }

    /// (g(y), total weight) of a packing list.
    pub fn packing_profit_weight(&self, packing: &PackingList) -> (f64, f64) {
        packing
            .selected()
            .map(|j| &self.data.items[j])
            .fold((0.0, 0.0), |(p, w), it| (p + it.profit, w + it.weight))
    }

    pub fn is_feasible(&self, packing: &PackingList) -> bool {
        self.packing_profit_weight(packing).1 <= self.data.capacity
    }

    /// z(p). Fails with [`Error::Infeasible`] when the packing is over capacity.
    pub fn ttp_objective(&self, tour: &Tour, packing: &PackingList) -> Result<f64> {
        TourEvaluator::new(self, tour).objective(packing)
    }

    /// Parse the benchmark text format.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_instance(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text)?)
    }

    /// Serialize back to the benchmark text format.
    pub fn to_text(&self) -> String {
        let d = &self.data;
        let mut s = String::new();
        let _ = writeln!(s, "PROBLEM NAME: \t{}", d.name);
        let _ = writeln!(s, "KNAPSACK DATA TYPE: {}", d.knapsack_data_type);
        let _ = writeln!(s, "DIMENSION:\t{}", d.coords.len());
        let _ = writeln!(s, "NUMBER OF ITEMS: \t{}", d.items.len());
        let _ = writeln!(s, "CAPACITY OF KNAPSACK: \t{}", d.capacity);
        let _ = writeln!(s, "MIN SPEED: \t{}", d.min_speed);
        let _ = writeln!(s, "MAX SPEED: \t{}", d.max_speed);
        let _ = writeln!(s, "RENTING RATIO: \t{}", d.renting_ratio);
        let _ = writeln!(s, "EDGE_WEIGHT_TYPE:\t{}", d.edge_weight_type.as_str());
        let _ = writeln!(s, "NODE_COORD_SECTION\t(INDEX, X, Y): ");
        for (i, (x, y)) in d.coords.iter().enumerate() {
            let _ = writeln!(s, "{}\t{}\t{}", i + 1, x, y);
        }
        let _ = writeln!(s, "ITEMS SECTION\t(INDEX, PROFIT, WEIGHT, ASSIGNED NODE NUMBER): ");
        for (j, it) in d.items.iter().enumerate() {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", j + 1, it.profit, it.weight, it.city + 1);
        }
        s
    }
}

/// Permutation of all cities starting at city 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tour(Vec<usize>);

impl Tour {
    /// Validates a 0-based permutation that starts at city 0.
    pub fn new(cities: Vec<usize>) -> Result<Self> {
        let n = cities.len();
        if n < 3 {
            return Err(Error::InvalidArgument(format!("tour needs >= 3 cities, got {n}")));
        }
        if cities[0] != 0 {
            return Err(Error::InvalidArgument("tour must start at city 1".into()));
        }
        let mut seen = vec![false; n];
        for &c in &cities {
            if c >= n || std::mem::replace(&mut seen[c], true) {
                return Err(Error::InvalidArgument(format!(
                    "tour is not a permutation of 1..={n} (city {})",
                    c + 1
                )));
            }
        }
        Ok(Tour(cities))
    }

    /// Rotates an arbitrary permutation so that city 0 comes first.
    pub fn from_cycle(mut cities: Vec<usize>) -> Result<Self> {
        if let Some(p) = cities.iter().position(|&c| c == 0) {
            cities.rotate_left(p);
        }
        Self::new(cities)
    }

    /// 1-based city labels, as found in files.
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        let cities = labels
            .iter()
            .map(|&c| {
                c.checked_sub(1)
                    .ok_or_else(|| Error::InvalidArgument("city label 0".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cities)
    }

    pub(crate) fn from_vec_unchecked(cities: Vec<usize>) -> Self {
        debug_assert!(Tour::new(cities.clone()).is_ok());
        Tour(cities)
    }

    /// Identity tour 0, 1, ..., n-1.
    pub fn identity(n: usize) -> Self {
        Tour((0..n).collect())
    }

    pub fn cities(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|c| c + 1).collect()
    }

    /// The same cycle traversed in the other direction, still starting at city 0.
    pub fn reversed(&self) -> Self {
        let mut v = self.0.clone();
        v[1..].reverse();
        Tour(v)
    }

    /// Undirected edges as `(min, max)` pairs, in tour order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.0.len();
        (0..n).map(move |i| {
            let (a, b) = (self.0[i], self.0[(i + 1) % n]);
            (a.min(b), a.max(b))
        })
    }

    /// Sorted undirected edge list.
    pub fn edge_set(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self.edges().collect();
        e.sort_unstable();
        e
    }
}

/// Item selection bit vector `y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PackingList(Vec<bool>);

impl PackingList {
    pub fn empty(m: usize) -> Self {
        PackingList(vec![false; m])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        PackingList(bits)
    }

    pub fn from_indices(m: usize, selected: &[usize]) -> Self {
        let mut y = Self::empty(m);
        for &j in selected {
            y.0[j] = true;
        }
        y
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn set(&mut self, j: usize, value: bool) {
        self.0[j] = value;
    }

    pub fn flip(&mut self, j: usize) {
        self.0[j] = !self.0[j];
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

/// Evaluates z for many packings on one fixed tour.
pub struct TourEvaluator<'a> {
    inst: &'a TtpInstance,
    /// Tour position of every city.
    position: Vec<usize>,
    /// `legs[i]` = distance from tour position i to position i+1 (closing edge last).
    legs: Vec<f64>,
    length: f64,
    scratch: Vec<f64>,
}

impl<'a> TourEvaluator<'a> {
    pub fn new(inst: &'a TtpInstance, tour: &Tour) -> Self {
        let c = tour.cities();
        let n = c.len();
        let mut position = vec![0; n];
        let mut legs = Vec::with_capacity(n);
        for i in 0..n {
            position[c[i]] = i;
            legs.push(inst.distance(c[i], c[(i + 1) % n]));
        }
        let length = legs.iter().sum();
        TourEvaluator {
            inst,
            position,
            legs,
            length,
            scratch: vec![0.0; n],
        }
    }

    pub fn tour_length(&self) -> f64 {
        self.length
    }

    /// (f, g, z) of `packing` on this tour.
    pub fn scores(&mut self, packing: &PackingList) -> Result<Scores> {
        let inst = self.inst;
        self.scratch.iter_mut().for_each(|w| *w = 0.0);
        let (mut profit, mut weight) = (0.0, 0.0);
        for j in packing.selected() {
            let it = &inst.data.items[j];
            profit += it.profit;
            weight += it.weight;
            self.scratch[self.position[it.city]] += it.weight;
        }
        if weight > inst.capacity() {
            return Err(Error::Infeasible {
                weight,
                capacity: inst.capacity(),
            });
        }
        let nu = inst.speed_coefficient();
        let vmax = inst.max_speed();
        let mut carried = 0.0;
        let mut time = 0.0;
        for (leg, picked) in self.legs.iter().zip(&self.scratch) {
            carried += picked;
            time += leg / (vmax - nu * carried);
        }
        Ok(Scores {
            f: self.length,
            g: profit,
            z: profit - inst.renting_ratio() * time,
        })
    }

    pub fn objective(&mut self, packing: &PackingList) -> Result<f64> {
        self.scores(packing).map(|s| s.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub f: f64,
    pub g: f64,
    pub z: f64,
}

/// A feasible TTP solution with cached objective values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    tour: Tour,
    packing: PackingList,
    scores: Scores,
}

impl Solution {
    pub fn evaluate(inst: &TtpInstance, tour: Tour, packing: PackingList) -> Result<Self> {
        let scores = TourEvaluator::new(inst, &tour).scores(&packing)?;
        Ok(Solution { tour, packing, scores })
    }

    pub(crate) fn from_parts(tour: Tour, packing: PackingList, scores: Scores) -> Self {
        Solution { tour, packing, scores }
    }

    pub fn tour(&self) -> &Tour {
        &self.tour
    }

    pub fn packing(&self) -> &PackingList {
        &self.packing
    }

    pub fn scores(&self) -> Scores {
        self.scores
    }

    pub fn f(&self) -> f64 {
        self.scores.f
    }

    pub fn g(&self) -> f64 {
        self.scores.g
    }

    pub fn z(&self) -> f64 {
        self.scores.z
    }
}

struct Header {
    name: Option<String>,
    kp_type: Option<String>,
    dimension: Option<usize>,
    items: Option<usize>,
    capacity: Option<f64>,
    min_speed: Option<f64>,
    max_speed: Option<f64>,
    renting: Option<f64>,
    ewt: Option<EdgeWeightType>,
}

fn num<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, ParseError> {
    let tok = tok.ok_or_else(|| ParseError::new(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| ParseError::new(line, format!("{what} is not numeric: {tok:?}")))
}

fn parse_instance(text: &str) -> Result<TtpInstance, ParseError> {
    enum Section {
        Header,
        Nodes,
        Items,
    }
    let mut h = Header {
        name: None,
        kp_type: None,
        dimension: None,
        items: None,
        capacity: None,
        min_speed: None,
        max_speed: None,
        renting: None,
        ewt: None,
    };
    let mut section = Section::Header;
    let mut coords: Vec<Option<(f64, f64)>> = Vec::new();
    let mut items: Vec<Option<Item>> = Vec::new();
    let mut saw_nodes = false;
    let mut saw_items = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line == "EOF" {
            continue;
        }
        let upper = line.to_ascii_uppercase();
        if upper.starts_with("NODE_COORD_SECTION") {
            let n = h
                .dimension
                .ok_or_else(|| ParseError::new(lineno, "NODE_COORD_SECTION before DIMENSION"))?;
            coords = vec![None; n];
            section = Section::Nodes;
            saw_nodes = true;
            continue;
        }
        if upper.starts_with("ITEMS SECTION") {
            let m = h
                .items
                .ok_or_else(|| ParseError::new(lineno, "ITEMS SECTION before NUMBER OF ITEMS"))?;
            items = vec![None; m];
            section = Section::Items;
            saw_items = true;
            continue;
        }
        match section {
            Section::Header => {
                let (key, value) = line
                    .split_once(':')
                    .ok_or_else(|| ParseError::new(lineno, format!("malformed header line {line:?}")))?;
                let key = key.trim().to_ascii_uppercase();
                let value = value.trim();
                match key.as_str() {
                    "PROBLEM NAME" | "NAME" => h.name = Some(value.to_string()),
                    "KNAPSACK DATA TYPE" => h.kp_type = Some(value.to_string()),
                    "DIMENSION" => h.dimension = Some(num(Some(value), lineno, "DIMENSION")?),
                    "NUMBER OF ITEMS" => h.items = Some(num(Some(value), lineno, "NUMBER OF ITEMS")?),
                    "CAPACITY OF KNAPSACK" | "CAPACITY" => {
                        h.capacity = Some(num(Some(value), lineno, "CAPACITY OF KNAPSACK")?)
                    }
                    "MIN SPEED" => h.min_speed = Some(num(Some(value), lineno, "MIN SPEED")?),
                    "MAX SPEED" => h.max_speed = Some(num(Some(value), lineno, "MAX SPEED")?),
                    "RENTING RATIO" => h.renting = Some(num(Some(value), lineno, "RENTING RATIO")?),
                    "EDGE_WEIGHT_TYPE" => h.ewt = Some(value.parse().map_err(|e| ParseError::new(lineno, e))?),
                    _ => {}
                }
            }
            Section::Nodes => {
                let mut tok = line.split_whitespace();
                let i: usize = num(tok.next(), lineno, "node index")?;
                let x: f64 = num(tok.next(), lineno, "x coordinate")?;
                let y: f64 = num(tok.next(), lineno, "y coordinate")?;
                let slot = i
                    .checked_sub(1)
                    .and_then(|k| coords.get_mut(k))
                    .ok_or_else(|| ParseError::new(lineno, format!("node index {i} out of range")))?;
                if slot.replace((x, y)).is_some() {
                    return Err(ParseError::new(lineno, format!("duplicate node index {i}")));
                }
            }
            Section::Items => {
                let n = coords.len();
                let mut tok = line.split_whitespace();
                let j: usize = num(tok.next(), lineno, "item index")?;
                let profit: f64 = num(tok.next(), lineno, "profit")?;
                let weight: f64 = num(tok.next(), lineno, "weight")?;
                let city: usize = num(tok.next(), lineno, "assigned node")?;
                if city < 2 || city > n {
                    return Err(ParseError::new(
                        lineno,
                        format!("item {j} assigned to node {city}, expected 2..={n}"),
                    ));
                }
                if profit < 0.0 || weight < 0.0 {
                    return Err(ParseError::new(
                        lineno,
                        format!("item {j} has negative profit or weight"),
                    ));
                }
                let slot = j
                    .checked_sub(1)
                    .and_then(|k| items.get_mut(k))
                    .ok_or_else(|| ParseError::new(lineno, format!("item index {j} out of range")))?;
                let item = Item {
                    profit,
                    weight,
                    city: city - 1,
                };
                if slot.replace(item).is_some() {
                    return Err(ParseError::new(lineno, format!("duplicate item index {j}")));
                }
            }
        }
    }

    let last = text.lines().count();
    let missing = |what: &str| ParseError::new(last, format!("missing {what}"));
    if !saw_nodes {
        return Err(missing("NODE_COORD_SECTION"));
    }
    if !saw_items {
        return Err(missing("ITEMS SECTION"));
    }
    let coords = coords
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| missing(&format!("coordinates of node {}", i + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    let items = items
        .into_iter()
        .enumerate()
        .map(|(j, it)| it.ok_or_else(|| missing(&format!("item {}", j + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    let data = InstanceData {
        name: h.name.unwrap_or_default(),
        knapsack_data_type: h.kp_type.unwrap_or_default(),
        coords,
        edge_weight_type: h.ewt.unwrap_or_default(),
        items,
        capacity: h.capacity.ok_or_else(|| missing("CAPACITY OF KNAPSACK"))?,
        min_speed: h.min_speed.ok_or_else(|| missing("MIN SPEED"))?,
        max_speed: h.max_speed.ok_or_else(|| missing("MAX SPEED"))?,
        renting_ratio: h.renting.ok_or_else(|| missing("RENTING RATIO"))?,
    };
    TtpInstance::try_from(data).map_err(|e| ParseError::new(0, e.to_string()))
}

impl fmt::Display for Tour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.0.iter().map(|c| (c + 1).to_string()).collect();
        f.write_str(&labels.join("-"))
    }
}
