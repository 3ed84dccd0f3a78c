//! Run configuration: one JSON file per command, with command-line flags overriding
//! individual keys. Both layers go through the same typed validation.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use shadowbench::linop::{self, ComplexMatrix};
use shadowbench::quench::{self, HamiltonianSpec, Propagator, QuenchState, SpinModel};
use shadowbench::states;

/// Bad input. Exit code 2.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ValidationError(msg.into()).into()
}

/// Reads `path` (or starts from defaults) and applies `overrides`, keyed by dotted
/// paths such as `state.n_qubits`.
pub fn load<T>(path: Option<&Path>, overrides: Vec<(&str, Value)>) -> anyhow::Result<T>
where
    T: DeserializeOwned + Serialize + Default,
{
    let base: T = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| file_error(p, &text, e))?
        }
        None => T::default(),
    };
    if overrides.is_empty() {
        return Ok(base);
    }
    let mut value = serde_json::to_value(&base)?;
    for (key, v) in overrides {
        set_path(&mut value, key, v);
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let (field, msg) = split_nested(e.path().to_string(), strip_position(&e.inner().to_string()));
        invalid(format!("command-line override: field `{field}`: {msg}"))
    })
}

fn file_error(path: &Path, text: &str, e: serde_path_to_error::Error<serde_json::Error>) -> anyhow::Error {
    let inner = e.inner();
    let (field, msg) = split_nested(e.path().to_string(), strip_position(&inner.to_string()));
    let (line, column) = locate_key(text, &field).unwrap_or((inner.line(), inner.column()));
    invalid(format!("{}: line {line}, column {column}: field `{field}`: {msg}", path.display()))
}

/// Moves a field path embedded by a nested deserializer into the outer path.
fn split_nested(outer: String, msg: &str) -> (String, String) {
    match msg.strip_prefix(NESTED_FIELD).and_then(|m| m.split_once('\t')) {
        Some((field, rest)) => (format!("{outer}.{field}"), rest.to_string()),
        None => (outer, msg.to_string()),
    }
}

/// 1-based position of the key named by the last segment of `path`, found by
/// following the key names of `path` through `text`. Array indices are skipped.
fn locate_key(text: &str, path: &str) -> Option<(usize, usize)> {
    let mut pos = 0;
    let mut found = None;
    for seg in path.split('.').filter(|s| s.parse::<usize>().is_err() && *s != "?") {
        let needle = format!("\"{seg}\"");
        let mut from = pos;
        loop {
            let at = from + text[from..].find(&needle)?;
            let after = at + needle.len();
            if text[after..].trim_start().starts_with(':') {
                found = Some(at);
                pos = after;
                break;
            }
            from = after;
        }
    }
    let at = found?;
    let line = text[..at].matches('\n').count() + 1;
    let column = at - text[..at].rfind('\n').map_or(0, |i| i + 1) + 1;
    Some((line, column))
}

fn strip_position(msg: &str) -> &str {
    msg.rfind(" at line ").map_or(msg, |i| &msg[..i])
}

fn set_path(root: &mut Value, dotted: &str, v: Value) {
    let mut cur = root;
    let mut parts = dotted.split('.').peekable();
    while let Some(part) = parts.next() {
        if !cur.is_object() {
            *cur = Value::Object(Default::default());
        }
        let obj = cur.as_object_mut().expect("object");
        if parts.peek().is_none() {
            obj.insert(part.to_string(), v);
            return;
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
}

/// Two blocks of 1-based site labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    #[serde(rename = "A")]
    pub a: Vec<usize>,
    #[serde(rename = "B")]
    pub b: Vec<usize>,
}

impl Partition {
    /// First half against second half.
    pub fn halves(n: usize) -> Self {
        let mid = n / 2;
        Self { a: (1..=mid).collect(), b: (mid + 1..=n).collect() }
    }

    pub fn validate(&self, n_sites: usize) -> anyhow::Result<()> {
        if self.a.is_empty() || self.b.is_empty() {
            return Err(invalid("partition: A and B must both be non-empty"));
        }
        let mut all = self.sites();
        if let Some(&s) = all.iter().find(|&&s| s == 0 || s > n_sites) {
            return Err(invalid(format!("partition: site {s} outside 1..={n_sites}")));
        }
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("partition: A and B must be disjoint without repeated sites"));
        }
        Ok(())
    }

    /// Parses `A=[2,3],B=[4,5]`; brackets and spaces are optional.
    pub fn parse(s: &str) -> Result<Self, String> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace() && *c != '[' && *c != ']').collect();
        let rest = compact.strip_prefix("A=").ok_or_else(|| format!("{s:?}: expected A=[..],B=[..]"))?;
        let (a, b) = rest.split_once(",B=").or_else(|| rest.split_once(";B=")).ok_or_else(|| format!("{s:?}: expected A=[..],B=[..]"))?;
        let sites = |x: &str| x.split(',').map(|v| v.parse::<usize>().map_err(|e| format!("{v:?}: {e}"))).collect::<Result<Vec<_>, _>>();
        Ok(Self { a: sites(a)?, b: sites(b)? })
    }

    /// Sites of A followed by sites of B.
    pub fn sites(&self) -> Vec<usize> {
        self.a.iter().chain(&self.b).copied().collect()
    }
}

/// Explicit times, or an inclusive range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid::List(vec![0.0])
    }
}

impl TimeGrid {
    pub fn points(&self) -> anyhow::Result<Vec<f64>> {
        let pts = match *self {
            TimeGrid::List(ref ts) => ts.clone(),
            TimeGrid::Range { start, stop, step } => {
                if !(step > 0.0) || !(stop >= start) {
                    return Err(invalid(format!("times: need step > 0 and stop ≥ start, got {start}:{stop}:{step}")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| start + i as f64 * step).collect()
            }
        };
        if pts.is_empty() || pts.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(invalid("times: need at least one finite, non-negative time"));
        }
        Ok(pts)
    }

    /// Parses `start:stop:step` or a comma-separated list.
    pub fn parse(s: &str) -> Result<Self, String> {
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [a, b, c] => Ok(TimeGrid::Range { start: num(a)?, stop: num(b)?, step: num(c)? }),
            [_] => Ok(TimeGrid::List(s.split(',').map(num).collect::<Result<_, _>>()?)),
            _ => Err(format!("{s:?}: expected start:stop:step or a comma-separated list")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialProduct {
    #[default]
    Neel,
    /// Néel pattern with the per-site preparation errors of the ion experiment.
    ImperfectNeel,
}

fn one() -> f64 {
    1.0
}

fn default_exponent() -> f64 {
    quench::DEFAULT_EXPONENT
}

fn default_field() -> f64 {
    quench::DEFAULT_FIELD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "Value")]
pub enum StateSpec {
    Ghz {
        n_qubits: usize,
    },
    Bell,
    Werner {
        w: f64,
    },
    MaximallyMixed {
        n_qubits: usize,
    },
    /// Computational basis state, qubit 0 leftmost.
    Basis {
        bits: String,
    },
    /// Ion-chain quench from a Néel product state. Times are in units of `1/J0`.
    Quench {
        n_qubits: usize,
        #[serde(default)]
        model: SpinModel,
        #[serde(default = "one")]
        coupling: f64,
        #[serde(default = "default_exponent")]
        exponent: f64,
        #[serde(default = "default_field")]
        field: f64,
        #[serde(default)]
        initial: InitialProduct,
        /// Depolarizing probability per qubit, applied after the evolution.
        #[serde(default)]
        depolarizing: f64,
    },
    /// Explicit density matrix, rows of `[re, im]` entries.
    Density {
        matrix: Vec<Vec<[f64; 2]>>,
    },
}

/// Externally tagged twin of [`StateSpec`]. Internally tagged enums are buffered
/// during deserialization, which loses the failing field; this form keeps it.
#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum StateRepr {
    Ghz {
        n_qubits: usize,
    },
    Bell {},
    Werner {
        w: f64,
    },
    MaximallyMixed {
        n_qubits: usize,
    },
    Basis {
        bits: String,
    },
    Quench {
        n_qubits: usize,
        #[serde(default)]
        model: SpinModel,
        #[serde(default = "one")]
        coupling: f64,
        #[serde(default = "default_exponent")]
        exponent: f64,
        #[serde(default = "default_field")]
        field: f64,
        #[serde(default)]
        initial: InitialProduct,
        #[serde(default)]
        depolarizing: f64,
    },
    Density {
        matrix: Vec<Vec<[f64; 2]>>,
    },
}

/// Prefix marking a nested field path inside an error message.
const NESTED_FIELD: char = '\u{1}';

impl TryFrom<Value> for StateSpec {
    type Error = String;

    fn try_from(v: Value) -> Result<Self, String> {
        let Value::Object(mut map) = v else {
            return Err("expected a state object with a `kind` field".into());
        };
        let kind = match map.remove("kind") {
            Some(Value::String(k)) => k,
            Some(_) => return Err(format!("{NESTED_FIELD}kind\texpected a string")),
            None => return Err("missing field `kind`".into()),
        };
        let tagged = Value::Object([(kind, Value::Object(map))].into_iter().collect());
        let repr: StateRepr = serde_path_to_error::deserialize(tagged).map_err(|e| {
            let path = e.path().to_string();
            match path.split_once('.') {
                _ if e.inner().to_string().starts_with("unknown variant") => format!("{NESTED_FIELD}kind\t{}", e.inner()),
                Some((_, field)) if !field.is_empty() => format!("{NESTED_FIELD}{field}\t{}", e.inner()),
                _ => e.inner().to_string(),
            }
        })?;
        Ok(match repr {
            StateRepr::Ghz { n_qubits } => StateSpec::Ghz { n_qubits },
            StateRepr::Bell {} => StateSpec::Bell,
            StateRepr::Werner { w } => StateSpec::Werner { w },
            StateRepr::MaximallyMixed { n_qubits } => StateSpec::MaximallyMixed { n_qubits },
            StateRepr::Basis { bits } => StateSpec::Basis { bits },
            StateRepr::Quench { n_qubits, model, coupling, exponent, field, initial, depolarizing } => {
                StateSpec::Quench { n_qubits, model, coupling, exponent, field, initial, depolarizing }
            }
            StateRepr::Density { matrix } => StateSpec::Density { matrix },
        })
    }
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Ghz { n_qubits: 4 }
    }
}

/// A state ready to be queried at any time.
pub enum PreparedState {
    Static(QuenchState),
    Dynamic { prop: Box<Propagator>, initial: QuenchState, depolarizing: f64 },
}

impl PreparedState {
    pub fn at(&self, t: f64) -> anyhow::Result<QuenchState> {
        Ok(match self {
            PreparedState::Static(s) => s.clone(),
            PreparedState::Dynamic { prop, initial, depolarizing } => {
                let evolved = quench::evolve(prop, initial, t)?;
                if *depolarizing > 0.0 {
                    quench::apply_depolarizing(&evolved, *depolarizing)?
                } else {
                    evolved
                }
            }
        })
    }

    pub fn is_static(&self) -> bool {
        matches!(self, PreparedState::Static(_))
    }
}

impl StateSpec {
    pub fn load_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| file_error(path, &text, e))
    }

    pub fn n_qubits(&self) -> anyhow::Result<usize> {
        Ok(match self {
            StateSpec::Ghz { n_qubits } | StateSpec::MaximallyMixed { n_qubits } | StateSpec::Quench { n_qubits, .. } => *n_qubits,
            StateSpec::Bell | StateSpec::Werner { .. } => 2,
            StateSpec::Basis { bits } => bits.len(),
            StateSpec::Density { matrix } => {
                let d = matrix.len();
                if d < 2 || !d.is_power_of_two() {
                    return Err(invalid(format!("state.matrix: dimension {d} is not a power of two ≥ 2")));
                }
                d.trailing_zeros() as usize
            }
        })
    }

    pub fn prepare(&self) -> anyhow::Result<PreparedState> {
        let n = self.n_qubits()?;
        if n == 0 || n > quench::MAX_CHAIN_QUBITS {
            return Err(invalid(format!("state: {n} qubits outside 1..={}", quench::MAX_CHAIN_QUBITS)));
        }
        let fixed = |rho: ComplexMatrix| -> anyhow::Result<PreparedState> {
            Ok(PreparedState::Static(QuenchState::from_density(rho).map_err(|e| invalid(format!("state: {e}")))?))
        };
        match self {
            StateSpec::Ghz { .. } => fixed(states::ghz(n)),
            StateSpec::Bell => fixed(states::bell()),
            StateSpec::Werner { w } => {
                if !(0.0..=1.0).contains(w) {
                    return Err(invalid(format!("state.w: {w} outside [0, 1]")));
                }
                fixed(states::werner(*w))
            }
            StateSpec::MaximallyMixed { .. } => fixed(states::maximally_mixed(n)),
            StateSpec::Basis { bits } => {
                let index = bits.chars().try_fold(0usize, |acc, c| match c {
                    '0' => Ok(acc << 1),
                    '1' => Ok(acc << 1 | 1),
                    other => Err(invalid(format!("state.bits: invalid bit {other:?}"))),
                })?;
                fixed(states::pure(&states::basis_vector(n, index)))
            }
            StateSpec::Density { matrix } => {
                let d = matrix.len();
                if matrix.iter().any(|row| row.len() != d) {
                    return Err(invalid("state.matrix: rows must all have the matrix dimension"));
                }
                let rho = ComplexMatrix::from_fn(d, d, |i, j| num_complex::Complex64::new(matrix[i][j][0], matrix[i][j][1]));
                if linop::hermiticity_defect(&rho) > 1e-9 {
                    return Err(invalid("state.matrix: not Hermitian"));
                }
                fixed(rho)
            }
            StateSpec::Quench { model, coupling, exponent, field, initial, depolarizing, .. } => {
                let spec = HamiltonianSpec { n_qubits: n, coupling: *coupling, exponent: *exponent, field: *field, model: *model };
                spec.validate().map_err(|e| invalid(format!("state: {e}")))?;
                if !(0.0..=1.0 / n as f64).contains(depolarizing) {
                    return Err(invalid(format!("state.depolarizing: need 0 ≤ p ≤ 1/{n}, got {depolarizing}")));
                }
                let initial = match initial {
                    InitialProduct::Neel => QuenchState::neel(n),
                    InitialProduct::ImperfectNeel => QuenchState::mixed_neel(quench::imperfect_neel_probabilities(n))?,
                };
                Ok(PreparedState::Dynamic { prop: Box::new(Propagator::new(&spec)?), initial, depolarizing: *depolarizing })
            }
        }
    }
}

/// Reduced state on `sites` (1-based), with qubits in the listed order.
pub fn ordered_marginal(state: &QuenchState, sites: &[usize]) -> anyhow::Result<ComplexMatrix> {
    let zero_based: Vec<usize> = sites.iter().map(|s| s - 1).collect();
    let mut sorted = zero_based.clone();
    sorted.sort_unstable();
    let reduced = state.reduced(&sorted)?;
    let order: Vec<usize> = zero_based.iter().map(|q| sorted.binary_search(q).expect("site present")).collect();
    if order.windows(2).all(|w| w[0] < w[1]) {
        return Ok(reduced);
    }
    Ok(linop::permute_qubits(&reduced, sites.len(), &order)?)
}

/// The A∪B marginal of `spec` at time `t`, A qubits first, with its register.
/// `partition` defaults to the two halves.
pub fn bipartite_state(spec: &StateSpec, partition: Option<&Partition>, t: f64) -> anyhow::Result<(ComplexMatrix, linop::QubitRegister)> {
    let n = spec.n_qubits()?;
    let partition = partition.cloned().unwrap_or_else(|| Partition::halves(n));
    partition.validate(n)?;
    let state = spec.prepare()?.at(t)?;
    let rho = ordered_marginal(&state, &partition.sites())?;
    Ok((rho, linop::QubitRegister::bipartite(partition.a.len(), partition.b.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields, default)]
    struct Demo {
        n: usize,
        state: StateSpec,
    }

    #[test]
    fn overrides_replace_nested_keys() {
        let cfg: Demo = load(None, vec![("n", Value::from(3)), ("state.n_qubits", Value::from(6))]).unwrap();
        assert_eq!(cfg, Demo { n: 3, state: StateSpec::Ghz { n_qubits: 6 } });
    }

    #[test]
    fn file_errors_name_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, "{\n  \"n\": 2,\n  \"state\": {\"kind\": \"ghz\", \"n_qubits\": \"four\"}\n}").unwrap();
        let err = load::<Demo>(Some(&path), vec![]).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("state.n_qubits"), "{err}");

        std::fs::write(&path, "{\n  \"state\": {\n    \"kind\": \"quench\",\n    \"n_qubits\": 4,\n    \"feild\": 3\n  }\n}").unwrap();
        let err = load::<Demo>(Some(&path), vec![]).unwrap_err().to_string();
        assert!(err.contains("line 5") && err.contains("state.feild"), "{err}");
        std::fs::write(&path, "{\"state\": {\"kind\": \"ghzz\", \"n_qubits\": 4}}").unwrap();
        let err = load::<Demo>(Some(&path), vec![]).unwrap_err().to_string();
        assert!(err.contains("state.kind") && err.contains("ghzz"), "{err}");
    }

    #[test]
    fn state_specs_round_trip() {
        for spec in [
            StateSpec::Bell,
            StateSpec::Werner { w: 0.3 },
            StateSpec::Basis { bits: "0110".into() },
            StateSpec::Quench {
                n_qubits: 6,
                model: SpinModel::default(),
                coupling: 1.0,
                exponent: 1.24,
                field: 22.0,
                initial: InitialProduct::ImperfectNeel,
                depolarizing: 0.01,
            },
        ] {
            let text = serde_json::to_string(&spec).unwrap();
            assert!(text.contains("\"kind\""), "{text}");
            assert_eq!(serde_json::from_str::<StateSpec>(&text).unwrap(), spec);
        }
    }

    #[test]
    fn time_grids() {
        assert_eq!(TimeGrid::parse("0:1:0.25").unwrap().points().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(TimeGrid::parse("0.5,2").unwrap().points().unwrap(), vec![0.5, 2.0]);
        assert!(TimeGrid::parse("1:0:1").unwrap().points().is_err());
    }

    #[test]
    fn partition_checks() {
        assert!(Partition { a: vec![2, 3], b: vec![4, 5] }.validate(10).is_ok());
        assert!(Partition { a: vec![2, 3], b: vec![3] }.validate(10).is_err());
        assert!(Partition { a: vec![0], b: vec![1] }.validate(10).is_err());
        assert!(Partition { a: vec![1], b: vec![11] }.validate(10).is_err());
        assert_eq!(Partition::parse("A=[2,3], B=[4,5]").unwrap(), Partition { a: vec![2, 3], b: vec![4, 5] });
        assert_eq!(Partition::parse("A=1;B=2").unwrap(), Partition { a: vec![1], b: vec![2] });
        assert!(Partition::parse("B=[1],A=[2]").is_err());
    }

    #[test]
    fn marginal_follows_listed_order() {
        let state = QuenchState::from_vector(states::basis_vector(3, 0b100)).unwrap();
        let rho = ordered_marginal(&state, &[3, 1]).unwrap();
        // Site 3 is |0>, site 1 is |1>: the ordered pair is |01>.
        assert!((rho[(0b01, 0b01)].re - 1.0).abs() < 1e-12);
    }
}
