use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Affiliation, DirectedGraph, UserClassAssignment};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRow {
    source: String,
    target: String,
    weight: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct SeedRow {
    user_id: String,
    affiliation: Affiliation,
}

/// Writes `source,target,weight` rows in sorted edge order.
pub fn write_edge_list<W: Write>(graph: &DirectedGraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (source, target, weight) in graph.edges() {
        w.serialize(EdgeRow {
            source: source.to_string(),
            target: target.to_string(),
            weight,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edge_list<R: Read>(input: R) -> Result<DirectedGraph> {
    let mut g = DirectedGraph::new();
    for row in csv::Reader::from_reader(input).deserialize::<EdgeRow>() {
        let row = row?;
        g.add_weighted_edge(&row.source, &row.target, row.weight.max(1));
    }
    Ok(g)
}

pub fn read_seeds<R: Read>(input: R) -> Result<BTreeMap<String, Affiliation>> {
    let mut seeds = BTreeMap::new();
    for row in csv::Reader::from_reader(input).deserialize::<SeedRow>() {
        let row = row?;
        if let Some(prev) = seeds.insert(row.user_id.clone(), row.affiliation) {
            if prev != row.affiliation {
                return Err(Error::config(format!(
                    "seed {} listed with two affiliations",
                    row.user_id
                )));
            }
        }
    }
    Ok(seeds)
}

pub fn write_seeds<W: Write>(seeds: &BTreeMap<String, Affiliation>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (user_id, affiliation) in seeds {
        w.serialize(SeedRow {
            user_id: user_id.clone(),
            affiliation: *affiliation,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_class_assignments<W: Write>(classes: &[UserClassAssignment], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in classes {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_class_assignments<R: Read>(input: R) -> Result<Vec<UserClassAssignment>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DegreeClass;

    #[test]
    fn edge_list_round_trip() {
        let mut g = DirectedGraph::new();
        g.add_edge("a", "b");
        g.add_edge("a", "b");
        g.add_edge("b", "c");
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "source,target,weight\na,b,2\nb,c,1\n"
        );
        assert_eq!(read_edge_list(&buf[..]).unwrap(), g);
    }

    #[test]
    fn seeds_parse() {
        let csv = "user_id,affiliation\nu1,republican\nu2,democratic\n";
        let s = read_seeds(csv.as_bytes()).unwrap();
        assert_eq!(s["u1"], Affiliation::Republican);
        assert_eq!(s["u2"], Affiliation::Democratic);
        let bad = "user_id,affiliation\nu1,republican\nu1,democratic\n";
        assert!(read_seeds(bad.as_bytes()).is_err());
        assert!(read_seeds("user_id,affiliation\nu1,green\n".as_bytes()).is_err());
    }

    #[test]
    fn classes_csv() {
        let rows = vec![UserClassAssignment {
            user_id: "u1".into(),
            degree_class: DegreeClass::OneDegree,
            affiliation: Affiliation::Unknown,
        }];
        let mut buf = Vec::new();
        write_class_assignments(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "user_id,degree_class,affiliation\nu1,one_degree,unknown\n"
        );
        assert_eq!(read_class_assignments(&buf[..]).unwrap(), rows);
    }
}
