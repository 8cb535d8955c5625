use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::{Constraint, ConstraintId, Model, ObjectiveSense};
use crate::model::AffExpr;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSense {
    #[serde(rename = "LE")]
    Le,
    #[serde(rename = "EQ")]
    Eq,
    #[serde(rename = "GE")]
    Ge,
}

impl RowSense {
    pub fn as_str(self) -> &'static str {
        match self {
            RowSense::Le => "LE",
            RowSense::Eq => "EQ",
            RowSense::Ge => "GE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "LE" => Some(RowSense::Le),
            "EQ" => Some(RowSense::Eq),
            "GE" => Some(RowSense::Ge),
            _ => None,
        }
    }
}

/// Coordinate-format sparse matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Triplets<T> {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T: Real> Triplets<T> {
    pub fn new() -> Self {
        Triplets { rows: Vec::new(), cols: Vec::new(), vals: Vec::new() }
    }

    pub fn push(&mut self, r: usize, c: usize, v: T) {
        self.rows.push(r);
        self.cols.push(c);
        self.vals.push(v);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.len()).map(move |k| (self.rows[k], self.cols[k], self.vals[k]))
    }
}

/// A lifted cone `‖x‖₂ ≤ t` over plain variable indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeRef {
    pub t: usize,
    pub x: Vec<usize>,
}

/// How quadratic objective triplets are scaled on export.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadScaling {
    /// Each triplet is the coefficient of `x_i x_j` in the objective.
    AsWritten,
    /// Entries of a symmetric `Q` with objective `½ xᵀQx`; only `i ≤ j` is emitted.
    HalfXtQX,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum StandardFormError {
    #[error("model has nonlinear parts; use the NLP evaluator")]
    Nonlinear,
    #[error("constraint {0} is quadratic; only linear rows and cones have a standard form")]
    QuadraticRow(usize),
    #[error("malformed standard form: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] JsonError),
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("{0}")]
pub struct JsonError(pub String);

impl From<serde_json::Error> for StandardFormError {
    fn from(e: serde_json::Error) -> Self {
        StandardFormError::Json(JsonError(e.to_string()))
    }
}

/// Solver-shaped data: `min cᵀx + Σ q_ij x_i x_j + offset` over rows `A x (≤,=,≥) b`,
/// bounds, cones and integrality. Maximization is already negated.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardForm<T> {
    pub num_vars: usize,
    pub c: Vec<T>,
    pub offset: T,
    pub qobj: Triplets<T>,
    pub a: Triplets<T>,
    pub b: Vec<T>,
    pub senses: Vec<RowSense>,
    pub lb: Vec<T>,
    pub ub: Vec<T>,
    pub cones: Vec<ConeRef>,
    pub integers: Vec<usize>,
    /// Original sense; objective values reported to users flip back through it.
    pub maximize: bool,
    /// Row of the model constraint that produced each standard-form row, if any.
    pub row_origin: Vec<Option<ConstraintId>>,
    /// Auxiliary variables introduced by cone lifting with their linking row.
    pub lifted: Vec<(usize, usize)>,
}

impl<T: Real> StandardForm<T> {
    pub fn empty() -> Self {
        StandardForm {
            num_vars: 0,
            c: Vec::new(),
            offset: T::zero(),
            qobj: Triplets::new(),
            a: Triplets::new(),
            b: Vec::new(),
            senses: Vec::new(),
            lb: Vec::new(),
            ub: Vec::new(),
            cones: Vec::new(),
            integers: Vec::new(),
            maximize: false,
            row_origin: Vec::new(),
            lifted: Vec::new(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub(crate) fn from_model(m: &Model<T>) -> Result<Self, StandardFormError> {
        if m.is_nonlinear() {
            return Err(StandardFormError::Nonlinear);
        }
        let mut sf = StandardForm::empty();
        sf.num_vars = m.num_vars();
        sf.lb = m.lower().to_vec();
        sf.ub = m.upper().to_vec();
        sf.integers = (0..m.num_vars()).filter(|&j| m.integer_flags()[j]).collect();
        sf.maximize = m.sense() == ObjectiveSense::Max;
        let sign = if sf.maximize { -T::one() } else { T::one() };

        let obj = m.objective().canonicalize();
        sf.c = vec![T::zero(); m.num_vars()];
        for &(a, v) in obj.affine().terms() {
            sf.c[v.index()] = sign * a;
        }
        for &(q, v1, v2) in obj.quad_terms() {
            sf.qobj.push(v1.index(), v2.index(), sign * q);
        }
        sf.offset = sign * obj.constant();

        let mut pending_cones = Vec::new();
        for (id, con) in m.constraints().iter().enumerate() {
            match con {
                Constraint::Scalar { body, sense, rhs } => {
                    if !body.is_affine() {
                        let canon = body.canonicalize();
                        if !canon.quad_terms().is_empty() {
                            return Err(StandardFormError::QuadraticRow(id));
                        }
                    }
                    let aff = body.affine().canonicalize();
                    sf.push_row(&aff, *sense, *rhs - aff.constant(), Some(ConstraintId(id)));
                }
                Constraint::Cone { t, x } => pending_cones.push((t, x)),
            }
        }
        // Lifting happens after all model rows so model row indices stay put.
        for (t, xs) in pending_cones {
            let t_var = sf.lift(t);
            let x_vars = xs.iter().map(|e| sf.lift(e)).collect();
            sf.cones.push(ConeRef { t: t_var, x: x_vars });
        }
        Ok(sf)
    }

    fn push_row(&mut self, aff: &AffExpr<T>, sense: RowSense, rhs: T, origin: Option<ConstraintId>) {
        let r = self.b.len();
        for &(a, v) in aff.terms() {
            self.a.push(r, v.index(), a);
        }
        self.b.push(rhs);
        self.senses.push(sense);
        self.row_origin.push(origin);
    }

    /// Returns a plain variable equal to `e`, adding a free auxiliary and a
    /// linking row `e − w = 0` unless `e` already is a variable.
    fn lift(&mut self, e: &AffExpr<T>) -> usize {
        let canon = e.canonicalize();
        if let Some(v) = canon.as_single_var() {
            return v.index();
        }
        let w = self.num_vars;
        self.num_vars += 1;
        self.c.push(T::zero());
        self.lb.push(T::neg_infinity());
        self.ub.push(T::infinity());
        let r = self.b.len();
        for &(a, v) in canon.terms() {
            self.a.push(r, v.index(), a);
        }
        self.a.push(r, w, -T::one());
        self.b.push(-canon.constant());
        self.senses.push(RowSense::Eq);
        self.row_origin.push(None);
        self.lifted.push((w, r));
        w
    }

    /// Extends a point over the model's variables with the lifted auxiliaries.
    pub fn lift_point(&self, x: &[T]) -> Vec<T> {
        let mut out = x.to_vec();
        out.resize(self.num_vars, T::zero());
        for &(w, r) in &self.lifted {
            let mut s = -self.b[r];
            for (i, j, a) in self.a.iter() {
                if i == r && j != w {
                    s += a * out[j];
                }
            }
            out[w] = s;
        }
        out
    }

    /// Objective in minimization form, including the constant.
    pub fn objective(&self, x: &[T]) -> T {
        let lin = self.c.iter().zip(x).map(|(&c, &xi)| c * xi).sum::<T>();
        let quad = self.qobj.iter().map(|(i, j, q)| q * x[i] * x[j]).sum::<T>();
        lin + quad + self.offset
    }

    /// `A x`.
    pub fn row_activity(&self, x: &[T]) -> Vec<T> {
        let mut ax = vec![T::zero(); self.num_rows()];
        for (i, j, a) in self.a.iter() {
            ax[i] += a * x[j];
        }
        ax
    }

    /// Largest violation of rows, bounds and cones at `x` (full length).
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for (i, ax) in self.row_activity(x).into_iter().enumerate() {
            let v = match self.senses[i] {
                RowSense::Le => ax - self.b[i],
                RowSense::Ge => self.b[i] - ax,
                RowSense::Eq => (ax - self.b[i]).abs(),
            };
            worst = worst.max(v);
        }
        for ((&xj, &lo), &hi) in x.iter().zip(&self.lb).zip(&self.ub) {
            worst = worst.max(lo - xj).max(xj - hi);
        }
        for cone in &self.cones {
            let norm = cone.x.iter().map(|&j| x[j] * x[j]).sum::<T>().sqrt();
            worst = worst.max(norm - x[cone.t]);
        }
        worst
    }

    /// Objective triplets under the requested convention.
    pub fn qobj_scaled(&self, scaling: QuadScaling) -> Triplets<T> {
        match scaling {
            QuadScaling::AsWritten => self.qobj.clone(),
            QuadScaling::HalfXtQX => {
                // q x_i² = ½ (2q) x_i²; off-diagonal q x_i x_j = ½ (q x_i x_j + q x_j x_i).
                let two = T::of(2.0);
                let mut t = self.qobj.clone();
                for k in 0..t.len() {
                    if t.rows[k] == t.cols[k] {
                        t.vals[k] *= two;
                    }
                }
                t
            }
        }
    }

    pub fn to_json_value(&self) -> Value {
        let nums = |v: &[T]| Value::Array(v.iter().map(|&x| num(x)).collect());
        let trip = |t: &Triplets<T>| json!({"rows": t.rows, "cols": t.cols, "vals": nums(&t.vals)});
        json!({
            "num_vars": self.num_vars,
            "c": nums(&self.c),
            "qobj": trip(&self.qobj),
            "A": trip(&self.a),
            "b": nums(&self.b),
            "senses": self.senses.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
            "lb": nums(&self.lb),
            "ub": nums(&self.ub),
            "cones": self.cones.iter().map(|c| json!({"t": c.t, "x": c.x})).collect::<Vec<_>>(),
            "integers": self.integers,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("json values always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, StandardFormError> {
        let v: Value = serde_json::from_str(s)?;
        let bad = |what: &str| StandardFormError::Malformed(what.to_string());
        let obj = v.as_object().ok_or_else(|| bad("top level is not an object"))?;
        let field = |k: &str| obj.get(k).ok_or_else(|| bad(&format!("missing key `{k}`")));
        let reals = |k: &str, v: &Value| -> Result<Vec<T>, StandardFormError> {
            v.as_array()
                .ok_or_else(|| bad(&format!("`{k}` is not an array")))?
                .iter()
                .map(|e| parse_num(e).ok_or_else(|| bad(&format!("non-numeric entry in `{k}`"))))
                .collect()
        };
        let idx = |k: &str, v: &Value| -> Result<Vec<usize>, StandardFormError> {
            v.as_array()
                .ok_or_else(|| bad(&format!("`{k}` is not an array")))?
                .iter()
                .map(|e| e.as_u64().map(|u| u as usize).ok_or_else(|| bad(&format!("bad index in `{k}`"))))
                .collect()
        };
        let trip = |k: &str| -> Result<Triplets<T>, StandardFormError> {
            let t = field(k)?;
            let get = |s: &str| t.get(s).ok_or_else(|| bad(&format!("missing `{k}.{s}`")));
            let t = Triplets { rows: idx(k, get("rows")?)?, cols: idx(k, get("cols")?)?, vals: reals(k, get("vals")?)? };
            if t.rows.len() != t.vals.len() || t.cols.len() != t.vals.len() {
                return Err(bad(&format!("`{k}` arrays differ in length")));
            }
            Ok(t)
        };

        let mut sf = StandardForm::empty();
        sf.num_vars = field("num_vars")?.as_u64().ok_or_else(|| bad("`num_vars` is not an integer"))? as usize;
        sf.c = reals("c", field("c")?)?;
        sf.qobj = trip("qobj")?;
        sf.a = trip("A")?;
        sf.b = reals("b", field("b")?)?;
        sf.senses = field("senses")?
            .as_array()
            .ok_or_else(|| bad("`senses` is not an array"))?
            .iter()
            .map(|s| s.as_str().and_then(RowSense::parse).ok_or_else(|| bad("unknown row sense")))
            .collect::<Result<_, _>>()?;
        sf.lb = reals("lb", field("lb")?)?;
        sf.ub = reals("ub", field("ub")?)?;
        sf.integers = idx("integers", field("integers")?)?;
        for c in field("cones")?.as_array().ok_or_else(|| bad("`cones` is not an array"))? {
            let t = c.get("t").and_then(Value::as_u64).ok_or_else(|| bad("cone without `t`"))? as usize;
            let x = idx("cones.x", c.get("x").ok_or_else(|| bad("cone without `x`"))?)?;
            sf.cones.push(ConeRef { t, x });
        }
        sf.row_origin = vec![None; sf.b.len()];
        sf.validate()?;
        Ok(sf)
    }

    /// Checks dimensions and triplet invariants.
    pub fn validate(&self) -> Result<(), StandardFormError> {
        let bad = |s: String| Err(StandardFormError::Malformed(s));
        let n = self.num_vars;
        if self.c.len() != n || self.lb.len() != n || self.ub.len() != n {
            return bad(format!("vector lengths do not match num_vars={n}"));
        }
        if self.senses.len() != self.b.len() {
            return bad("`senses` and `b` differ in length".into());
        }
        let m = self.b.len();
        let mut seen = std::collections::HashSet::new();
        for (i, j, a) in self.a.iter() {
            if i >= m || j >= n {
                return bad(format!("A entry ({i},{j}) out of range"));
            }
            if a == T::zero() || !seen.insert((i, j)) {
                return bad(format!("A entry ({i},{j}) is zero or duplicated"));
            }
        }
        seen.clear();
        for (i, j, q) in self.qobj.iter() {
            if i > j || j >= n {
                return bad(format!("qobj entry ({i},{j}) not upper-triangular or out of range"));
            }
            if q == T::zero() || !seen.insert((i, j)) {
                return bad(format!("qobj entry ({i},{j}) is zero or duplicated"));
            }
        }
        let out_of_range = self.integers.iter().chain(self.cones.iter().flat_map(|c| c.x.iter().chain([&c.t])));
        if out_of_range.into_iter().any(|&j| j >= n) {
            return bad("integer or cone index out of range".into());
        }
        Ok(())
    }
}

fn num<T: Real>(x: T) -> Value {
    let f = x.as_f64();
    if f == f64::INFINITY {
        Value::from("inf")
    } else if f == f64::NEG_INFINITY {
        Value::from("-inf")
    } else {
        json!(f)
    }
}

fn parse_num<T: Real>(v: &Value) -> Option<T> {
    match v {
        Value::Number(n) => n.as_f64().map(T::of),
        Value::String(s) if s == "inf" => Some(T::infinity()),
        Value::String(s) if s == "-inf" => Some(T::neg_infinity()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, QuadExpr};

    #[test]
    fn empty_model() {
        let sf = Model::<f64>::new().to_standard_form().unwrap();
        assert_eq!((sf.num_vars, sf.num_rows()), (0, 0));
    }

    #[test]
    fn single_variable_quadratic() {
        let mut m = Model::<f64>::new();
        let x = m.add_free_variable();
        let mut q = QuadExpr::new();
        q.add_term(1.0, x, Some(x));
        q.add_term(1.0, x, None);
        m.set_objective(ObjectiveSense::Min, q).unwrap();
        let sf = m.to_standard_form().unwrap();
        assert_eq!(sf.qobj.iter().collect::<Vec<_>>(), vec![(0, 0, 1.0)]);
        assert_eq!(sf.c, vec![1.0]);
        assert_eq!(sf.qobj_scaled(QuadScaling::HalfXtQX).vals, vec![2.0]);
    }

    #[test]
    fn maximize_negates() {
        let mut m = Model::<f64>::new();
        let x = m.add_variable(0.0, 1.0, false).unwrap();
        m.set_objective(ObjectiveSense::Max, AffExpr::from(x) * 3.0).unwrap();
        let sf = m.to_standard_form().unwrap();
        assert_eq!(sf.c, vec![-3.0]);
        assert!(sf.maximize);
    }

    #[test]
    fn body_constant_moves_to_rhs() {
        let mut m = Model::<f64>::new();
        let x = m.add_free_variable();
        let mut e = AffExpr::from(x);
        e.push(1.0, x);
        e.add_constant(2.0);
        m.add_constraint(Constraint::le(e, 5.0)).unwrap();
        let sf = m.to_standard_form().unwrap();
        assert_eq!(sf.a.iter().collect::<Vec<_>>(), vec![(0, 0, 2.0)]);
        assert_eq!(sf.b, vec![3.0]);
    }

    #[test]
    fn cone_lifting_adds_aux_rows() {
        let mut m = Model::<f64>::new();
        let t = m.add_free_variable();
        let x = m.add_free_variable();
        let y = m.add_free_variable();
        let mut diff = AffExpr::from(x);
        diff.push(-1.0, y);
        diff.add_constant(0.5);
        m.add_constraint(Constraint::cone(t.into(), vec![diff, y.into()])).unwrap();
        let sf = m.to_standard_form().unwrap();
        assert_eq!(sf.num_vars, 4);
        assert_eq!(sf.cones, vec![ConeRef { t: 0, x: vec![3, 2] }]);
        assert_eq!(sf.num_rows(), 1);
        assert_eq!(sf.senses, vec![RowSense::Eq]);
        let p = sf.lift_point(&[1.0, 2.0, 0.25]);
        assert_eq!(p[3], 2.25);
        assert!((sf.max_violation(&p) - (2.25f64.hypot(0.25) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn quadratic_rows_rejected() {
        let mut m = Model::<f64>::new();
        let x = m.add_free_variable();
        let mut q = QuadExpr::new();
        q.push_quad(1.0, x, x);
        m.add_constraint(Constraint::le(q, 1.0)).unwrap();
        assert_eq!(m.to_standard_form().unwrap_err(), StandardFormError::QuadraticRow(0));
    }

    #[test]
    fn json_round_trip_with_infinities() {
        let mut m = Model::<f64>::new();
        let x = m.add_variable(0.0, f64::INFINITY, true).unwrap();
        let y = m.add_free_variable();
        m.add_constraint(Constraint::ge(AffExpr::from(x) + AffExpr::from(y), 1.0)).unwrap();
        m.set_objective(ObjectiveSense::Min, x).unwrap();
        let sf = m.to_standard_form().unwrap();
        let s = sf.to_json();
        assert!(s.contains("\"inf\"") && s.contains("\"-inf\""));
        let back = StandardForm::<f64>::from_json(&s).unwrap();
        assert_eq!(back.to_json(), s);
        assert_eq!(back.integers, vec![0]);
        let keys: Vec<_> = sf.to_json_value().as_object().unwrap().keys().cloned().collect();
        let mut want = vec!["num_vars", "c", "qobj", "A", "b", "senses", "lb", "ub", "cones", "integers"];
        want.sort();
        let mut keys = keys;
        keys.sort();
        assert_eq!(keys, want);
    }

    #[test]
    fn malformed_json_rejected() {
        assert!(StandardForm::<f64>::from_json("{\"num_vars\": 1}").is_err());
        assert!(StandardForm::<f64>::from_json("[").is_err());
    }
}
