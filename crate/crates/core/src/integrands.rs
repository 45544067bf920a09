//! Catalogue of integrand pairs `(u, P)` built pathwise on the fine grid, and
//! the integrand-string grammar that selects them.
//!
//! Grammar: `family[:key=val[,key=val]*]`. A token containing `=` opens a new
//! key; tokens without `=` append to the current key's value list, so
//! `poly_of_B:c=0,0,1,d=2` sets `c = [0, 0, 1]` and `d = 2`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, ParseErrorKind, Result};
use crate::model::{FbmPath, ProcessPair, Regime};

/// Scalar coefficient functions available to the fSDE family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogFn {
    Zero,
    One,
    Id,
    Tanh,
    Sin,
    Cos,
}

impl CatalogFn {
    const ALL: [CatalogFn; 6] =
        [CatalogFn::Zero, CatalogFn::One, CatalogFn::Id, CatalogFn::Tanh, CatalogFn::Sin, CatalogFn::Cos];

    pub fn name(self) -> &'static str {
        match self {
            CatalogFn::Zero => "zero",
            CatalogFn::One => "one",
            CatalogFn::Id => "id",
            CatalogFn::Tanh => "tanh",
            CatalogFn::Sin => "sin",
            CatalogFn::Cos => "cos",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            CatalogFn::Zero => 0.0,
            CatalogFn::One => 1.0,
            CatalogFn::Id => x,
            CatalogFn::Tanh => x.tanh(),
            CatalogFn::Sin => x.sin(),
            CatalogFn::Cos => x.cos(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            CatalogFn::Zero | CatalogFn::One => 0.0,
            CatalogFn::Id => 1.0,
            CatalogFn::Tanh => 1.0 - x.tanh().powi(2),
            CatalogFn::Sin => x.cos(),
            CatalogFn::Cos => -x.sin(),
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// A member of the integrand catalogue.
///
/// Functions of `B` act componentwise on each of the `d` fBm components unless
/// stated otherwise; scalar families use component 0 and have `m = d = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum IntegrandSpec {
    /// `u^i ≡ c_i`, `P ≡ 0`; `m = len(c)`.
    Constant { c: Vec<f64>, d: usize },
    /// `u = B`, `P = I`.
    IdentityB { d: usize },
    /// `u^i = Σ_k c_k (B^i)^k`.
    PolyOfB { c: Vec<f64>, d: usize },
    /// `u^i = c exp(a B^i)`.
    ExpLikeOfB { a: f64, c: f64, d: usize },
    /// `u_s = s^{kH} He_k(B_s / s^H)`, the `k`-fold Skorohod integral of
    /// `1_{[0,s]}^{⊗k}`.
    Hermite { k: u32 },
    /// `u = out(v)` with `dv = g(v) ds + Σ_j f(v) dB^j`, `v_0 = v0`.
    Fsde { f: CatalogFn, g: CatalogFn, out: CatalogFn, v0: f64, d: usize },
    /// `u_s = B_s max_{[0,s]} B`, Brownian only.
    BrownianPathdep,
    /// `u = |B|`.
    AbsB,
    /// `u = slope B + Σ w_i |B - kink_i|`, `w_i >= 0`.
    ConvexGeneral { slope: f64, kinks: Vec<f64>, weights: Vec<f64> },
}

impl IntegrandSpec {
    pub fn family(&self) -> &'static str {
        match self {
            IntegrandSpec::Constant { .. } => "constant",
            IntegrandSpec::IdentityB { .. } => "identity_B",
            IntegrandSpec::PolyOfB { .. } => "poly_of_B",
            IntegrandSpec::ExpLikeOfB { .. } => "exp_like_of_B",
            IntegrandSpec::Hermite { .. } => "hermite",
            IntegrandSpec::Fsde { .. } => "fsde",
            IntegrandSpec::BrownianPathdep => "brownian_pathdep",
            IntegrandSpec::AbsB => "abs_B",
            IntegrandSpec::ConvexGeneral { .. } => "convex_general",
        }
    }

    /// `(m, d)`: output components and driving components.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            IntegrandSpec::Constant { c, d } => (c.len(), *d),
            IntegrandSpec::IdentityB { d }
            | IntegrandSpec::PolyOfB { d, .. }
            | IntegrandSpec::ExpLikeOfB { d, .. } => (*d, *d),
            IntegrandSpec::Fsde { d, .. } => (1, *d),
            IntegrandSpec::Hermite { .. }
            | IntegrandSpec::BrownianPathdep
            | IntegrandSpec::AbsB
            | IntegrandSpec::ConvexGeneral { .. } => (1, 1),
        }
    }

    /// True when `P` is a derivative of a smooth function of the driving path.
    pub fn is_smooth(&self) -> bool {
        matches!(
            self,
            IntegrandSpec::Constant { .. }
                | IntegrandSpec::IdentityB { .. }
                | IntegrandSpec::PolyOfB { .. }
                | IntegrandSpec::ExpLikeOfB { .. }
                | IntegrandSpec::Hermite { .. }
                | IntegrandSpec::Fsde { .. }
        )
    }
}

fn fmt_list(f: &mut fmt::Formatter<'_>, xs: &[f64]) -> fmt::Result {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{x:?}")?;
    }
    Ok(())
}

/// Canonical form: every key of the family, in a fixed order.
impl fmt::Display for IntegrandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.family())?;
        match self {
            IntegrandSpec::Constant { c, d } => {
                f.write_str(":c=")?;
                fmt_list(f, c)?;
                write!(f, ",d={d}")
            }
            IntegrandSpec::IdentityB { d } => write!(f, ":d={d}"),
            IntegrandSpec::PolyOfB { c, d } => {
                f.write_str(":c=")?;
                fmt_list(f, c)?;
                write!(f, ",d={d}")
            }
            IntegrandSpec::ExpLikeOfB { a, c, d } => write!(f, ":a={a:?},c={c:?},d={d}"),
            IntegrandSpec::Hermite { k } => write!(f, ":k={k}"),
            IntegrandSpec::Fsde { f: ff, g, out, v0, d } => write!(
                f,
                ":f={},g={},out={},v0={v0:?},d={d}",
                ff.name(),
                g.name(),
                out.name()
            ),
            IntegrandSpec::BrownianPathdep | IntegrandSpec::AbsB => Ok(()),
            IntegrandSpec::ConvexGeneral { slope, kinks, weights } => {
                write!(f, ":slope={slope:?}")?;
                if !kinks.is_empty() {
                    f.write_str(",kinks=")?;
                    fmt_list(f, kinks)?;
                    f.write_str(",weights=")?;
                    fmt_list(f, weights)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug)]
struct Token<'a> {
    text: &'a str,
    pos: usize,
}

#[derive(Debug)]
struct Field<'a> {
    key: Token<'a>,
    values: Vec<Token<'a>>,
}

fn perr(kind: ParseErrorKind, token: &str, position: usize) -> Error {
    Error::Parse(ParseError { kind, token: token.to_string(), position })
}

struct Fields<'a> {
    fields: Vec<Field<'a>>,
    /// Position just past the family name, for errors about absent keys.
    end: usize,
}

impl<'a> Fields<'a> {
    fn take(&mut self, key: &str) -> Option<Field<'a>> {
        let i = self.fields.iter().position(|f| f.key.text == key)?;
        Some(self.fields.remove(i))
    }

    fn scalar_token(&mut self, key: &str) -> Result<Option<Token<'a>>> {
        let Some(field) = self.take(key) else { return Ok(None) };
        let Field { key, mut values } = field;
        if values.len() != 1 {
            let tok = values.get(1).unwrap_or(&key);
            return Err(perr(ParseErrorKind::BadArity, tok.text, tok.pos));
        }
        Ok(values.pop())
    }

    fn real(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.scalar_token(key)? {
            None => Ok(default),
            Some(tok) => number(&tok),
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(field) = self.take(key) else { return Ok(None) };
        field.values.iter().map(number).collect::<Result<Vec<_>>>().map(Some)
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> Result<usize> {
        let Some(tok) = self.scalar_token(key)? else { return Ok(default) };
        match tok.text.parse::<usize>() {
            Ok(v) if v >= min => Ok(v),
            Ok(_) => Err(perr(ParseErrorKind::InvalidParameter, tok.text, tok.pos)),
            Err(_) => Err(perr(ParseErrorKind::MalformedNumber, tok.text, tok.pos)),
        }
    }

    fn catalog(&mut self, key: &str, default: CatalogFn) -> Result<CatalogFn> {
        let Some(tok) = self.scalar_token(key)? else { return Ok(default) };
        CatalogFn::from_name(tok.text).ok_or_else(|| perr(ParseErrorKind::InvalidParameter, tok.text, tok.pos))
    }

    fn finish(self) -> Result<()> {
        match self.fields.first() {
            Some(f) => Err(perr(ParseErrorKind::UnknownKey, f.key.text, f.key.pos)),
            None => Ok(()),
        }
    }
}

fn number(tok: &Token<'_>) -> Result<f64> {
    match tok.text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(perr(ParseErrorKind::InvalidParameter, tok.text, tok.pos)),
        Err(_) => Err(perr(ParseErrorKind::MalformedNumber, tok.text, tok.pos)),
    }
}

fn tokenize(body: &str, offset: usize) -> Result<Vec<Field<'_>>> {
    let mut fields: Vec<Field<'_>> = Vec::new();
    let mut pos = offset;
    for piece in body.split(',') {
        let here = pos;
        pos += piece.len() + 1;
        match piece.split_once('=') {
            Some((key, value)) => {
                if key.is_empty() {
                    return Err(perr(ParseErrorKind::UnknownKey, piece, here));
                }
                if fields.iter().any(|f| f.key.text == key) {
                    return Err(perr(ParseErrorKind::BadArity, key, here));
                }
                fields.push(Field {
                    key: Token { text: key, pos: here },
                    values: vec![Token { text: value, pos: here + key.len() + 1 }],
                });
            }
            None => match fields.last_mut() {
                Some(f) => f.values.push(Token { text: piece, pos: here }),
                None => return Err(perr(ParseErrorKind::BadArity, piece, here)),
            },
        }
    }
    Ok(fields)
}

/// Parses a spec string such as `poly_of_B:c=0,0,1` or `fsde:f=tanh,g=zero`.
pub fn parse_spec(text: &str) -> Result<IntegrandSpec> {
    let (family, body) = match text.split_once(':') {
        Some((f, b)) => (f, Some(b)),
        None => (text, None),
    };
    let end = family.len();
    let fields = match body {
        Some(b) => tokenize(b, end + 1)?,
        None => Vec::new(),
    };
    let mut fs = Fields { fields, end };
    let spec = match family {
        "constant" => {
            let c = fs.list("c")?.unwrap_or_else(|| vec![1.0]);
            IntegrandSpec::Constant { c, d: fs.count("d", 1, 1)? }
        }
        "identity_B" => IntegrandSpec::IdentityB { d: fs.count("d", 1, 1)? },
        "poly_of_B" => {
            let c = fs
                .list("c")?
                .ok_or_else(|| perr(ParseErrorKind::BadArity, "c", fs.end))?;
            IntegrandSpec::PolyOfB { c, d: fs.count("d", 1, 1)? }
        }
        "exp_like_of_B" => IntegrandSpec::ExpLikeOfB {
            a: fs.real("a", 1.0)?,
            c: fs.real("c", 1.0)?,
            d: fs.count("d", 1, 1)?,
        },
        "hermite" => {
            let k = fs.count("k", 1, 1)?;
            IntegrandSpec::Hermite { k: u32::try_from(k).unwrap_or(u32::MAX) }
        }
        "fsde" => IntegrandSpec::Fsde {
            f: fs.catalog("f", CatalogFn::One)?,
            g: fs.catalog("g", CatalogFn::Zero)?,
            out: fs.catalog("out", CatalogFn::Id)?,
            v0: fs.real("v0", 0.0)?,
            d: fs.count("d", 1, 1)?,
        },
        "brownian_pathdep" => IntegrandSpec::BrownianPathdep,
        "abs_B" => IntegrandSpec::AbsB,
        "convex_general" => {
            let slope = fs.real("slope", 0.0)?;
            let kinks = fs.list("kinks")?.unwrap_or_default();
            let weights_pos = fs.fields.iter().find(|f| f.key.text == "weights").map(|f| f.key.pos);
            let weights = fs.list("weights")?.unwrap_or_default();
            if kinks.len() != weights.len() {
                return Err(perr(ParseErrorKind::BadArity, "weights", weights_pos.unwrap_or(fs.end)));
            }
            if let Some(w) = weights.iter().find(|w| **w < 0.0) {
                return Err(perr(ParseErrorKind::InvalidParameter, &w.to_string(), weights_pos.unwrap_or(fs.end)));
            }
            IntegrandSpec::ConvexGeneral { slope, kinks, weights }
        }
        _ => return Err(perr(ParseErrorKind::UnknownFamily, family, 0)),
    };
    fs.finish()?;
    Ok(spec)
}

impl FromStr for IntegrandSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_spec(s)
    }
}

fn check_dims(spec: &IntegrandSpec, path: &FbmPath) -> Result<()> {
    let (_, d) = spec.dims();
    if d != path.d_dims() {
        return Err(Error::InvalidInput(format!(
            "`{spec}` is driven by {d} components, path has {}",
            path.d_dims()
        )));
    }
    Ok(())
}

fn pair(u: Array2<f64>, p: Array3<f64>, spec: &IntegrandSpec) -> ProcessPair {
    ProcessPair { u, p, label: spec.to_string() }
}

/// Builds `(u, P)` for any catalogue member on the fine grid of `path`.
pub fn build(spec: &IntegrandSpec, path: &FbmPath) -> Result<ProcessPair> {
    check_dims(spec, path)?;
    match spec {
        IntegrandSpec::Constant { .. }
        | IntegrandSpec::IdentityB { .. }
        | IntegrandSpec::PolyOfB { .. }
        | IntegrandSpec::ExpLikeOfB { .. } => build_f_of_b(spec, path),
        IntegrandSpec::Hermite { .. } => build_hermite(spec, path),
        IntegrandSpec::Fsde { .. } => build_fsde(spec, path),
        IntegrandSpec::BrownianPathdep => build_brownian_pathdep(path),
        IntegrandSpec::AbsB | IntegrandSpec::ConvexGeneral { .. } => build_convex(spec, path),
    }
}

/// Horner evaluation of the polynomial and its derivative.
fn poly(c: &[f64], x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut dv = 0.0;
    for ck in c.iter().rev() {
        dv = dv * x + v;
        v = v * x + ck;
    }
    (v, dv)
}

/// `u = F(B)` and `P^{(i,j)} = ∂F^i/∂x_j(B)` for the smooth function families.
pub fn build_f_of_b(spec: &IntegrandSpec, path: &FbmPath) -> Result<ProcessPair> {
    check_dims(spec, path)?;
    let (m, d) = spec.dims();
    let len = path.fine_len();
    let b = &path.values;
    let mut u = Array2::zeros((m, len));
    let mut p = Array3::zeros((m, d, len));
    match spec {
        IntegrandSpec::Constant { c, .. } => {
            for (i, ci) in c.iter().enumerate() {
                u.row_mut(i).fill(*ci);
            }
        }
        IntegrandSpec::IdentityB { .. } => {
            u.assign(b);
            for i in 0..d {
                p.slice_mut(ndarray::s![i, i, ..]).fill(1.0);
            }
        }
        IntegrandSpec::PolyOfB { c, .. } => {
            for i in 0..d {
                for l in 0..len {
                    let (v, dv) = poly(c, b[[i, l]]);
                    u[[i, l]] = v;
                    p[[i, i, l]] = dv;
                }
            }
        }
        IntegrandSpec::ExpLikeOfB { a, c, .. } => {
            for i in 0..d {
                for l in 0..len {
                    let v = c * (a * b[[i, l]]).exp();
                    u[[i, l]] = v;
                    p[[i, i, l]] = a * v;
                }
            }
        }
        _ => {
            return Err(Error::InvalidInput(format!("`{spec}` is not a smooth function of B")));
        }
    }
    Ok(pair(u, p, spec))
}

/// Hermite integrands of order `k <= 3` with `P_s = k s^{(k-1)H} He_{k-1}(B_s / s^H)`.
pub fn build_hermite(spec: &IntegrandSpec, path: &FbmPath) -> Result<ProcessPair> {
    let IntegrandSpec::Hermite { k } = *spec else {
        return Err(Error::InvalidInput(format!("`{spec}` is not a Hermite integrand")));
    };
    if !(1..=3).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    check_dims(spec, path)?;
    let len = path.fine_len();
    let two_h = path.hurst.two_h();
    let b = path.component(0);
    let mut u = Array2::zeros((1, len));
    let mut p = Array3::zeros((1, 1, len));
    for l in 0..len {
        let x = b[l];
        let var = path.grid.fine_time(l).powf(two_h);
        let (v, dv) = match k {
            1 => (x, 1.0),
            2 => (x * x - var, 2.0 * x),
            _ => (x * x * x - 3.0 * var * x, 3.0 * (x * x - var)),
        };
        u[[0, l]] = v;
        p[[0, 0, l]] = dv;
    }
    Ok(pair(u, p, spec))
}

/// Euler solution of `dv = g(v) ds + Σ_j f(v) dB^j` on the fine grid,
/// `u = out(v)`, `P^{(0,j)} = out'(v) f(v)`.
pub fn build_fsde(spec: &IntegrandSpec, path: &FbmPath) -> Result<ProcessPair> {
    let IntegrandSpec::Fsde { f, g, out, v0, .. } = *spec else {
        return Err(Error::InvalidInput(format!("`{spec}` is not an fSDE integrand")));
    };
    if path.hurst.is_brownian() {
        return Err(Error::Regime("the fSDE integrand is a Young solution and needs H > 1/2".into()));
    }
    check_dims(spec, path)?;
    let len = path.fine_len();
    let d = path.d_dims();
    let dt = path.grid.fine_step();
    let b = &path.values;
    let mut u = Array2::zeros((1, len));
    let mut p = Array3::zeros((1, d, len));
    let mut v = v0;
    for l in 0..len {
        let fv = f.eval(v);
        u[[0, l]] = out.eval(v);
        let dout = out.derivative(v);
        for j in 0..d {
            p[[0, j, l]] = dout * fv;
        }
        if l + 1 < len {
            let mut dv = g.eval(v) * dt;
            for j in 0..d {
                dv += fv * (b[[j, l + 1]] - b[[j, l]]);
            }
            v += dv;
        }
    }
    Ok(pair(u, p, spec))
}

/// `u_s = B_s max_{[0,s]} B` and `P_s = max_{[0,s]} B` (the maximum includes
/// `B_0 = 0`).
pub fn build_brownian_pathdep(path: &FbmPath) -> Result<ProcessPair> {
    if !path.hurst.is_brownian() {
        return Err(Error::Regime(format!(
            "the path-dependent example needs H = 1/2, got H={}",
            path.hurst
        )));
    }
    let spec = IntegrandSpec::BrownianPathdep;
    check_dims(&spec, path)?;
    let len = path.fine_len();
    let b = path.component(0);
    let mut u = Array2::zeros((1, len));
    let mut p = Array3::zeros((1, 1, len));
    let mut max = 0.0f64;
    for l in 0..len {
        max = max.max(b[l]);
        u[[0, l]] = b[l] * max;
        p[[0, 0, l]] = max;
    }
    Ok(pair(u, p, &spec))
}

/// Left derivative of `|x|`.
fn sign_left(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Convex piecewise-linear `F(B)` with `P = F'_-(B)`; `abs_B` is the single
/// kink at 0.
pub fn build_convex(spec: &IntegrandSpec, path: &FbmPath) -> Result<ProcessPair> {
    let (slope, kinks, weights): (f64, &[f64], &[f64]) = match spec {
        IntegrandSpec::AbsB => (0.0, &[0.0], &[1.0]),
        IntegrandSpec::ConvexGeneral { slope, kinks, weights } => (*slope, kinks, weights),
        _ => return Err(Error::InvalidInput(format!("`{spec}` is not a convex integrand"))),
    };
    if path.hurst.regime() != Regime::Low {
        return Err(Error::Regime(format!(
            "convex integrands need 1/2 < H < 3/4, got H={}",
            path.hurst
        )));
    }
    check_dims(spec, path)?;
    let len = path.fine_len();
    let b = path.component(0);
    let mut u = Array2::zeros((1, len));
    let mut p = Array3::zeros((1, 1, len));
    for l in 0..len {
        let x = b[l];
        let mut v = slope * x;
        let mut dv = slope;
        for (k, w) in kinks.iter().zip(weights) {
            v += w * (x - k).abs();
            dv += w * sign_left(x - k);
        }
        u[[0, l]] = v;
        p[[0, 0, l]] = dv;
    }
    Ok(pair(u, p, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{generate, GeneratorSpec};
    use crate::model::{HurstIndex, SimGrid};

    fn path(hv: f64, d: usize) -> FbmPath {
        let grid = SimGrid::new(1.0, 16, 4, d).unwrap();
        generate(HurstIndex::new(hv).unwrap(), grid, GeneratorSpec::new(1, 0)).unwrap()
    }

    fn with_values(hv: f64, vals: &[f64]) -> FbmPath {
        let grid = SimGrid::new(1.0, vals.len() - 1, 1, 1).unwrap();
        let values = Array2::from_shape_vec((1, vals.len()), vals.to_vec()).unwrap();
        FbmPath { values, seed: 0, stream: 0, grid, hurst: HurstIndex::new(hv).unwrap() }
    }

    fn err_kind(s: &str) -> (ParseErrorKind, String, usize) {
        match parse_spec(s) {
            Err(Error::Parse(e)) => (e.kind, e.token, e.position),
            other => panic!("{s}: expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parses_examples() {
        assert_eq!(parse_spec("constant:c=3").unwrap(), IntegrandSpec::Constant { c: vec![3.0], d: 1 });
        assert_eq!(parse_spec("hermite:k=2").unwrap(), IntegrandSpec::Hermite { k: 2 });
        assert_eq!(
            parse_spec("poly_of_B:c=0,0,1").unwrap(),
            IntegrandSpec::PolyOfB { c: vec![0.0, 0.0, 1.0], d: 1 }
        );
        assert_eq!(
            parse_spec("fsde:f=tanh,g=zero").unwrap(),
            IntegrandSpec::Fsde { f: CatalogFn::Tanh, g: CatalogFn::Zero, out: CatalogFn::Id, v0: 0.0, d: 1 }
        );
        assert_eq!(parse_spec("abs_B").unwrap(), IntegrandSpec::AbsB);
    }

    #[test]
    fn error_positions() {
        assert_eq!(err_kind("poly_of_B:c=1,0,,"), (ParseErrorKind::MalformedNumber, String::new(), 16));
        assert_eq!(err_kind("polyB:c=1"), (ParseErrorKind::UnknownFamily, "polyB".into(), 0));
        assert_eq!(err_kind("hermite:k=2,q=1"), (ParseErrorKind::UnknownKey, "q".into(), 12));
        assert_eq!(err_kind("hermite:k=2,3"), (ParseErrorKind::BadArity, "3".into(), 12));
        assert_eq!(err_kind("constant:c=1x"), (ParseErrorKind::MalformedNumber, "1x".into(), 11));
        assert_eq!(err_kind("fsde:f=exp"), (ParseErrorKind::InvalidParameter, "exp".into(), 7));
        assert_eq!(err_kind("hermite:k=0").0, ParseErrorKind::InvalidParameter);
        assert_eq!(err_kind("convex_general:kinks=0,1,weights=1").0, ParseErrorKind::BadArity);
    }

    #[test]
    fn canonical_round_trip() {
        for s in [
            "constant:c=3",
            "identity_B:d=2",
            "poly_of_B:c=0.5,-1,2e-3",
            "exp_like_of_B:a=0.3",
            "hermite:k=3",
            "fsde:f=sin,g=cos,out=tanh,v0=0.25,d=2",
            "brownian_pathdep",
            "convex_general:slope=0.1,kinks=-1,1,weights=1,2",
        ] {
            let spec = parse_spec(s).unwrap();
            assert_eq!(parse_spec(&spec.to_string()).unwrap(), spec, "{s}");
        }
    }

    #[test]
    fn f_of_b_examples() {
        let p = with_values(0.7, &[0.0, 0.3, 0.3]);
        let sq = build(&parse_spec("poly_of_B:c=0,0,1").unwrap(), &p).unwrap();
        assert!((sq.u[[0, 1]] - 0.09).abs() < 1e-15);
        assert!((sq.p[[0, 0, 1]] - 0.6).abs() < 1e-15);
        let id = build(&parse_spec("identity_B").unwrap(), &p).unwrap();
        assert_eq!(id.u, p.values);
        assert!(id.p.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn hermite_closed_forms() {
        let p = path(0.65, 1);
        let h1 = build(&IntegrandSpec::Hermite { k: 1 }, &p).unwrap();
        assert_eq!(h1.u.row(0), p.component(0));
        let h2 = build(&IntegrandSpec::Hermite { k: 2 }, &p).unwrap();
        for l in 0..p.fine_len() {
            let s = p.grid.fine_time(l);
            let b = p.values[[0, l]];
            assert!((h2.u[[0, l]] + s.powf(1.3) - b * b).abs() < 1e-12);
            assert_eq!(h2.p[[0, 0, l]], 2.0 * b);
        }
        assert_eq!(h2.u[[0, 0]], 0.0);
        assert!(matches!(build(&IntegrandSpec::Hermite { k: 4 }, &p), Err(Error::UnsupportedOrder(4))));
    }

    #[test]
    fn fsde_degenerate_cases() {
        let p = path(0.7, 1);
        let still = build(&parse_spec("fsde:f=zero,g=zero,v0=1.5").unwrap(), &p).unwrap();
        assert!(still.u.iter().all(|&v| v == 1.5));
        let shifted = build(&parse_spec("fsde:f=one,g=zero,v0=0.5").unwrap(), &p).unwrap();
        for l in 0..p.fine_len() {
            assert!((shifted.u[[0, l]] - 0.5 - p.values[[0, l]]).abs() < 1e-12);
            assert_eq!(shifted.p[[0, 0, l]], 1.0);
        }
        assert!(build(&parse_spec("fsde").unwrap(), &path(0.5, 1)).is_err());
    }

    #[test]
    fn pathdep_sign_logic() {
        let up = with_values(0.5, &[0.0, 0.1, 0.4, 0.9]);
        let pp = build_brownian_pathdep(&up).unwrap();
        for l in 0..4 {
            let b = up.values[[0, l]];
            assert!((pp.u[[0, l]] - b * b).abs() < 1e-15);
            assert_eq!(pp.p[[0, 0, l]], b);
        }
        let dip = with_values(0.5, &[0.0, 0.3, -0.2]);
        let pd = build_brownian_pathdep(&dip).unwrap();
        assert!(pd.u[[0, 2]] < 0.0 && pd.p[[0, 0, 2]] > 0.0);
        assert!(build_brownian_pathdep(&with_values(0.6, &[0.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn abs_uses_left_derivative() {
        let p = with_values(0.65, &[0.0, -0.2, 0.0, 0.4]);
        let a = build(&IntegrandSpec::AbsB, &p).unwrap();
        assert_eq!(a.u.row(0).to_vec(), vec![0.0, 0.2, 0.0, 0.4]);
        assert_eq!(a.p.iter().copied().collect::<Vec<_>>(), vec![-1.0, -1.0, -1.0, 1.0]);
        assert!(build(&IntegrandSpec::AbsB, &with_values(0.8, &[0.0, 1.0, 1.0])).is_err());
        assert!(build(&IntegrandSpec::AbsB, &with_values(0.5, &[0.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = path(0.6, 2);
        assert!(build(&IntegrandSpec::AbsB, &p).is_err());
        assert!(build(&parse_spec("identity_B:d=2").unwrap(), &p).is_ok());
    }
}
