//! On-disk formats.
//!
//! A network directory holds `network.json` (node count and snapshot labels),
//! `covariates.json` (covariates keyed by node index) and one
//! `snapshots/<label>.edges` file per snapshot. Edge files start with an
//! `n=<count>` header followed by one `u v` line per edge in lexicographic
//! order. All writers are deterministic.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Covariates, DirectedGraph, NodeCovariates, Snapshot, TemporalNetwork};
use crate::ingest::{ConnectionFeatures, NodeLabel};

pub fn write_edge_list<W: Write>(g: &DirectedGraph, mut w: W) -> Result<()> {
    writeln!(w, "n={}", g.node_count())?;
    for (u, v) in g.edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

pub fn read_edge_list<R: BufRead>(r: R) -> Result<DirectedGraph> {
    let mut lines = r.lines().enumerate();
    let n = loop {
        match lines.next() {
            None => return Err(Error::Parse("edge list missing its n=<count> header".into())),
            Some((_, line)) => {
                let line = line?;
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let count = line
                    .strip_prefix("n=")
                    .ok_or_else(|| Error::Parse(format!("expected n=<count> header, found {line:?}")))?;
                break count.trim().parse::<usize>().map_err(|e| Error::Parse(format!("node count: {e}")))?;
            }
        }
    };
    let mut g = DirectedGraph::empty(n);
    for (i, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Parse(format!("line {}: expected `u v`, found {line:?}", i + 1));
        let mut parts = line.split_whitespace();
        let (Some(u), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let u: usize = u.parse().map_err(|_| bad())?;
        let v: usize = v.parse().map_err(|_| bad())?;
        if u >= n || v >= n {
            return Err(Error::Parse(format!("line {}: node out of range for n={n}", i + 1)));
        }
        if u == v {
            return Err(Error::Parse(format!("line {}: self-loop on {u}", i + 1)));
        }
        g.set_edge(u.into(), v.into(), true)?;
    }
    Ok(g)
}

pub fn write_covariates<W: Write>(cov: &Covariates, w: W) -> Result<()> {
    let keyed: BTreeMap<u32, &NodeCovariates> = cov.as_slice().iter().enumerate().map(|(i, c)| (i as u32, c)).collect();
    write_json(&keyed, w)
}

pub fn read_covariates<R: Read>(r: R) -> Result<Covariates> {
    let keyed: BTreeMap<u32, NodeCovariates> = serde_json::from_reader(r)?;
    for (expected, &key) in keyed.keys().enumerate() {
        if key as usize != expected {
            return Err(Error::Data(format!("covariates must cover nodes 0..n without gaps; missing node {expected}")));
        }
    }
    Covariates::new(keyed.into_values().collect())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_json_file<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_json(value, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkManifest {
    pub node_count: usize,
    pub snapshots: Vec<String>,
}

fn check_label(label: &str) -> Result<()> {
    let ok = !label.is_empty()
        && !label.starts_with('.')
        && label.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Data(format!("snapshot label {label:?} is not usable as a file name")))
    }
}

pub fn write_network(tn: &TemporalNetwork, dir: &Path) -> Result<()> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    let manifest = NetworkManifest { node_count: tn.node_count(), snapshots: tn.labels().map(String::from).collect() };
    for s in tn.snapshots() {
        check_label(&s.label)?;
        let mut w = BufWriter::new(File::create(snap_dir.join(format!("{}.edges", s.label)))?);
        write_edge_list(&s.graph, &mut w)?;
        w.flush()?;
    }
    write_json_file(&manifest, &dir.join("network.json"))?;
    let mut w = BufWriter::new(File::create(dir.join("covariates.json"))?);
    write_covariates(tn.covariates(), &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_network(dir: &Path) -> Result<TemporalNetwork> {
    let manifest: NetworkManifest = read_json_file(&dir.join("network.json"))?;
    let cov = read_covariates(BufReader::new(File::open(dir.join("covariates.json"))?))?;
    if cov.len() != manifest.node_count {
        return Err(Error::UniverseMismatch { left: manifest.node_count, right: cov.len() });
    }
    let mut snapshots = Vec::with_capacity(manifest.snapshots.len());
    for label in &manifest.snapshots {
        check_label(label)?;
        let path = dir.join("snapshots").join(format!("{label}.edges"));
        let g = read_edge_list(BufReader::new(File::open(&path)?))?;
        snapshots.push(Snapshot::new(label.clone(), g));
    }
    TemporalNetwork::new(cov, snapshots)
}

/// `index,id,kind` table mapping node indices back to external ids.
pub fn write_nodes<W: Write>(nodes: &[NodeLabel], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["index", "id", "kind"])?;
    for (i, n) in nodes.iter().enumerate() {
        let kind = match n.kind {
            crate::graph::NodeKind::User => "user",
            crate::graph::NodeKind::Repo => "repo",
        };
        wtr.write_record([i.to_string(), n.id.clone(), kind.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_features<W: Write>(rows: &[ConnectionFeatures], nodes: Option<&[NodeLabel]>, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "snapshot",
        "influencer",
        "influencer_id",
        "direct_links",
        "path2_links",
        "path3_links",
        "influencer_triangles",
    ])?;
    for r in rows {
        let id = nodes.and_then(|ns| ns.get(r.influencer.index())).map_or_else(String::new, |n| n.id.clone());
        wtr.write_record([
            r.snapshot.clone(),
            r.influencer.to_string(),
            id,
            r.direct_links.to_string(),
            r.path2_links.to_string(),
            r.path3_links.to_string(),
            r.influencer_triangles.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
