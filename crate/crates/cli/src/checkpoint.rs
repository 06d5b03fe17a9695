//! Versioned plain-text checkpoint.
//!
//! One `key values...` record per line, floats in shortest round-trip form,
//! so a reload reproduces every parameter bit for bit. The last line is the
//! SHA-256 of everything before it.
//!
//! ```text
//! mdgp-checkpoint 1
//! config_hash 3f2a...
//! coord_names x y
//! covariate_names
//! input_dim 625
//! covariate_dim 0
//! activation relu
//! hidden_widths 100 100
//! hidden_keep 0.9 0.9
//! heads binary:binary count:count continuous:continuous
//! head_keep 0.9 0.9 0.9
//! n_train 720
//! basis tps 625
//! knot 0 0
//! ...
//! spatial_mean ...
//! spatial_sd ...
//! covariate_mean
//! covariate_sd
//! sigma2 - - 0.2531
//! params 64213
//! <values, 8 per line>
//! sha256 9c1e...
//! ```

use std::fmt::Write as _;

use mdgp_core::datagen::{KnotSet, Location, OutcomeKind, OutcomeSpec};
use mdgp_core::model::{Activation, InputEncoder, NetworkConfig, Params, SpatialBasis, Standardizer};
use mdgp_core::train::FittedModel;
use sha2::{Digest, Sha256};

use crate::formats::fmt_f64;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const PER_LINE: usize = 8;

/// A fitted model plus the provenance stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: FittedModel,
    pub config_hash: String,
    pub coord_names: Vec<String>,
    pub covariate_names: Vec<String>,
}

fn join_f64(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(" ")
}

fn check_token(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(Error::Checkpoint(format!("name `{name}` cannot be stored (empty or contains whitespace)")));
    }
    Ok(())
}

pub fn format_checkpoint(ck: &Checkpoint) -> Result<String> {
    let m = &ck.model;
    let net = &m.net;
    for n in ck.coord_names.iter().chain(&ck.covariate_names).chain(net.heads.iter().map(|h| &h.name)) {
        check_token(n)?;
    }
    check_token(&ck.config_hash)?;
    let mut s = String::new();
    let _ = writeln!(s, "mdgp-checkpoint {FORMAT_VERSION}");
    let _ = writeln!(s, "config_hash {}", ck.config_hash);
    let _ = writeln!(s, "coord_names {}", ck.coord_names.join(" "));
    let _ = writeln!(s, "covariate_names {}", ck.covariate_names.join(" "));
    let _ = writeln!(s, "input_dim {}", net.input_dim);
    let _ = writeln!(s, "covariate_dim {}", net.covariate_dim);
    let _ = writeln!(s, "activation {}", net.activation.as_str());
    let _ = writeln!(
        s,
        "hidden_widths {}",
        net.hidden_widths.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
    );
    let _ = writeln!(s, "hidden_keep {}", join_f64(&net.hidden_keep));
    let heads: Vec<String> = net.heads.iter().map(|h| format!("{}:{}", h.kind.as_str(), h.name)).collect();
    let _ = writeln!(s, "heads {}", heads.join(" "));
    let _ = writeln!(s, "head_keep {}", join_f64(&net.head_keep));
    let _ = writeln!(s, "n_train {}", net.n_train);
    match &m.encoder.basis {
        SpatialBasis::Coords => {
            let _ = writeln!(s, "basis coords");
        }
        SpatialBasis::Tps(k) => {
            let _ = writeln!(s, "basis tps {}", k.len());
            let grid: Vec<String> = k.grid.iter().map(ToString::to_string).collect();
            let _ = writeln!(s, "knot_grid {}", grid.join(" "));
            let bbox: Vec<f64> = k.bbox.iter().flat_map(|&(a, b)| [a, b]).collect();
            let _ = writeln!(s, "knot_bbox {}", join_f64(&bbox));
            for knot in &k.knots {
                let _ = writeln!(s, "knot {}", join_f64(&knot.0));
            }
        }
    }
    let _ = writeln!(s, "spatial_mean {}", join_f64(&m.encoder.spatial.mean));
    let _ = writeln!(s, "spatial_sd {}", join_f64(&m.encoder.spatial.sd));
    let _ = writeln!(s, "covariate_mean {}", join_f64(&m.encoder.covariates.mean));
    let _ = writeln!(s, "covariate_sd {}", join_f64(&m.encoder.covariates.sd));
    let sig: Vec<String> = m.sigma2.iter().map(|v| v.map_or_else(|| "-".to_string(), fmt_f64)).collect();
    let _ = writeln!(s, "sigma2 {}", sig.join(" "));
    let values = m.params.as_slice();
    let _ = writeln!(s, "params {}", values.len());
    for chunk in values.chunks(PER_LINE) {
        let _ = writeln!(s, "{}", join_f64(chunk));
    }
    let digest = hex::encode(Sha256::digest(s.as_bytes()));
    let _ = writeln!(s, "sha256 {digest}");
    Ok(s)
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_raw(&mut self) -> Result<(usize, &'a str)> {
        self.iter.next().map(|(i, l)| (i + 1, l)).ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))
    }

    /// Values after `key` on the next line.
    fn field(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next_raw()?;
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        match parts.next() {
            Some(k) if k == key => Ok((n, parts.collect())),
            _ => Err(Error::Checkpoint(format!("line {n}: expected `{key}`"))),
        }
    }

    fn one<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (n, v) = self.field(key)?;
        match v.as_slice() {
            [x] => x.parse().map_err(|_| Error::Checkpoint(format!("line {n}: bad `{key}` value {x:?}"))),
            _ => Err(Error::Checkpoint(format!("line {n}: `{key}` takes one value"))),
        }
    }

    fn floats(&mut self, key: &str) -> Result<Vec<f64>> {
        let (n, v) = self.field(key)?;
        parse_floats(&v, n)
    }
}

fn parse_floats(v: &[&str], line: usize) -> Result<Vec<f64>> {
    v.iter()
        .map(|x| x.parse::<f64>().map_err(|_| Error::Checkpoint(format!("line {line}: bad number {x:?}"))))
        .collect()
}

fn parse_usizes(v: &[&str], line: usize) -> Result<Vec<usize>> {
    v.iter()
        .map(|x| x.parse::<usize>().map_err(|_| Error::Checkpoint(format!("line {line}: bad count {x:?}"))))
        .collect()
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint> {
    let body_end = text
        .trim_end_matches('\n')
        .rfind('\n')
        .map(|i| i + 1)
        .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
    let (body, tail) = text.split_at(body_end);
    let stored =
        tail.trim().strip_prefix("sha256 ").ok_or_else(|| Error::Checkpoint("missing checksum line".into()))?;
    let actual = hex::encode(Sha256::digest(body.as_bytes()));
    if stored != actual {
        return Err(Error::Checkpoint("checksum mismatch; the file is corrupt or was edited".into()));
    }
    let mut l = Lines { iter: body.lines().enumerate() };
    let version: u32 = l.one("mdgp-checkpoint")?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let config_hash: String = l.one("config_hash")?;
    let coord_names = l.field("coord_names")?.1.into_iter().map(String::from).collect();
    let covariate_names = l.field("covariate_names")?.1.into_iter().map(String::from).collect();
    let input_dim: usize = l.one("input_dim")?;
    let covariate_dim: usize = l.one("covariate_dim")?;
    let act: String = l.one("activation")?;
    let activation = Activation::parse(&act).ok_or_else(|| Error::Checkpoint(format!("unknown activation `{act}`")))?;
    let (n, w) = l.field("hidden_widths")?;
    let hidden_widths = parse_usizes(&w, n)?;
    let hidden_keep = l.floats("hidden_keep")?;
    let (n, h) = l.field("heads")?;
    let heads = h
        .iter()
        .map(|t| {
            let (kind, name) =
                t.split_once(':').ok_or_else(|| Error::Checkpoint(format!("line {n}: bad head {t:?}")))?;
            let kind =
                OutcomeKind::parse(kind).ok_or_else(|| Error::Checkpoint(format!("line {n}: bad kind {kind:?}")))?;
            Ok(OutcomeSpec::new(name, kind))
        })
        .collect::<Result<Vec<_>>>()?;
    let head_keep = l.floats("head_keep")?;
    let n_train: usize = l.one("n_train")?;
    let (n, b) = l.field("basis")?;
    let basis = match b.as_slice() {
        ["coords"] => SpatialBasis::Coords,
        ["tps", count] => {
            let count: usize = count.parse().map_err(|_| Error::Checkpoint(format!("line {n}: bad knot count")))?;
            let (n, g) = l.field("knot_grid")?;
            let grid = parse_usizes(&g, n)?;
            let bb = l.floats("knot_bbox")?;
            let bbox = bb.chunks(2).map(|c| (c[0], c.get(1).copied().unwrap_or(c[0]))).collect();
            let knots = (0..count).map(|_| l.floats("knot").map(Location)).collect::<Result<Vec<_>>>()?;
            SpatialBasis::Tps(KnotSet { knots, grid, bbox })
        }
        _ => return Err(Error::Checkpoint(format!("line {n}: unknown basis"))),
    };
    let spatial = Standardizer { mean: l.floats("spatial_mean")?, sd: l.floats("spatial_sd")? };
    let covariates = Standardizer { mean: l.floats("covariate_mean")?, sd: l.floats("covariate_sd")? };
    let (n, s) = l.field("sigma2")?;
    let sigma2 = s
        .iter()
        .map(|t| if *t == "-" { Ok(None) } else { parse_floats(&[t], n).map(|v| Some(v[0])) })
        .collect::<Result<Vec<_>>>()?;
    let count: usize = l.one("params")?;
    let mut values = Vec::with_capacity(count);
    while values.len() < count {
        let (n, line) = l.next_raw()?;
        values.extend(parse_floats(&line.split(' ').collect::<Vec<_>>(), n)?);
    }
    if values.len() != count || l.iter.next().is_some() {
        return Err(Error::Checkpoint("parameter block has the wrong length".into()));
    }
    let net =
        NetworkConfig { input_dim, hidden_widths, activation, hidden_keep, head_keep, heads, n_train, covariate_dim };
    net.validate()?;
    let mut params = Params::zeros(&net);
    if params.len() != count {
        return Err(Error::Checkpoint(format!("{count} parameters stored, architecture needs {}", params.len())));
    }
    params.set_values(&values);
    let encoder = InputEncoder { basis, spatial, covariates };
    if encoder.input_dim() != net.input_dim
        || encoder.covariate_dim() != net.covariate_dim
        || sigma2.len() != net.heads.len()
    {
        return Err(Error::Checkpoint("encoder or variance shapes disagree with the network".into()));
    }
    Ok(Checkpoint { model: FittedModel { net, encoder, params, sigma2 }, config_hash, coord_names, covariate_names })
}

pub fn read_checkpoint(path: &std::path::Path) -> Result<Checkpoint> {
    parse_checkpoint(&crate::error::read_to_string(path)?)
}
