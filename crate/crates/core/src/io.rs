//! CSV and JSON exchange formats.
//!
//! Parsers take text rather than paths so they can be exercised directly
//! by fuzzers and tests. Floats are written in shortest round-trip form.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::ingest::{age_group_column, DegreeReport, RawRespondent, AGE_GROUP_LOWER};
use crate::population::{AttrColumn, Population, TieTable};
use crate::sampler::{Alter, Member, RdsSample};

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    parse_err(line, e.to_string())
}

struct Table {
    header: Vec<String>,
    /// `(line, fields)`
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut rdr = reader(text);
        let header: Vec<String> = rdr
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let mut seen = BTreeSet::new();
        for h in &header {
            if !seen.insert(h.as_str()) {
                return Err(parse_err(1, format!("duplicate column `{h}`")));
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self { header, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    }
}

fn parse_f64(line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(line, format!("{what}: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what}: `{field}` is not finite")));
    }
    Ok(v)
}

fn parse_usize(line: usize, field: &str, what: &str) -> Result<usize> {
    field.parse().map_err(|_| {
        parse_err(
            line,
            format!("{what}: `{field}` is not a non-negative integer"),
        )
    })
}

fn parse_z(line: usize, field: &str) -> Result<u8> {
    match field {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(parse_err(line, format!("z: `{field}` is not 0 or 1"))),
    }
}

fn write_csv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Node table `id,age,z[,extra...]`. Extra columns are numeric when every
/// entry parses as a number, categorical otherwise.
pub struct NodeTable {
    pub ids: Vec<String>,
    pub ages: Vec<f64>,
    pub z: Vec<u8>,
    pub attrs: BTreeMap<String, AttrColumn>,
}

pub fn parse_nodes_csv(text: &str) -> Result<NodeTable> {
    let t = Table::parse(text)?;
    let (ci, ca, cz) = (t.require("id")?, t.require("age")?, t.require("z")?);
    let mut ids = Vec::with_capacity(t.rows.len());
    let mut ages = Vec::with_capacity(t.rows.len());
    let mut z = Vec::with_capacity(t.rows.len());
    for (line, r) in &t.rows {
        if r[ci].is_empty() {
            return Err(parse_err(*line, "empty id"));
        }
        ids.push(r[ci].clone());
        let age = parse_f64(*line, &r[ca], "age")?;
        if age <= 0.0 {
            return Err(parse_err(*line, format!("age must be positive, got {age}")));
        }
        ages.push(age);
        z.push(parse_z(*line, &r[cz])?);
    }
    let mut attrs = BTreeMap::new();
    for (c, name) in t.header.iter().enumerate() {
        if [ci, ca, cz].contains(&c) {
            continue;
        }
        let numeric: Option<Vec<f64>> = t
            .rows
            .iter()
            .map(|(_, r)| r[c].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        let column = match numeric {
            Some(v) => AttrColumn::Numeric(v),
            None => {
                let levels: Vec<String> = t
                    .rows
                    .iter()
                    .map(|(_, r)| r[c].clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let codes = t
                    .rows
                    .iter()
                    .map(|(_, r)| levels.binary_search(&r[c]).unwrap() as u32)
                    .collect();
                AttrColumn::Categorical { codes, levels }
            }
        };
        attrs.insert(name.clone(), column);
    }
    Ok(NodeTable {
        ids,
        ages,
        z,
        attrs,
    })
}

/// Edge list `src,dst` of node ids.
pub fn parse_edges_csv(text: &str) -> Result<Vec<(String, String)>> {
    let t = Table::parse(text)?;
    let (cs, cd) = (t.require("src")?, t.require("dst")?);
    Ok(t.rows
        .iter()
        .map(|(_, r)| (r[cs].clone(), r[cd].clone()))
        .collect())
}

fn id_index(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), k))
        .collect()
}

fn resolve(index: &HashMap<&str, usize>, id: &str) -> Result<usize> {
    index
        .get(id)
        .copied()
        .ok_or_else(|| Error::Data(format!("unknown node id `{id}`")))
}

pub fn read_population(nodes_csv: &str, edges_csv: &str) -> Result<Population> {
    let nodes = parse_nodes_csv(nodes_csv)?;
    let index = id_index(&nodes.ids);
    if index.len() != nodes.ids.len() {
        return Err(Error::Data("duplicate node id".into()));
    }
    let edges = parse_edges_csv(edges_csv)?
        .iter()
        .map(|(a, b)| Ok((resolve(&index, a)?, resolve(&index, b)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut pop = Population::from_edges(nodes.ages, nodes.z, &edges)?.with_ids(nodes.ids)?;
    for (name, col) in nodes.attrs {
        pop = pop.with_attr(&name, col)?;
    }
    Ok(pop)
}

/// Tie table `src,dst,value`; repeated pairs in either orientation must agree.
pub fn parse_tie_table_csv(text: &str, ids: &[String]) -> Result<TieTable> {
    let t = Table::parse(text)?;
    let (cs, cd, cv) = (t.require("src")?, t.require("dst")?, t.require("value")?);
    let index = id_index(ids);
    let mut table = TieTable::new();
    for (line, r) in &t.rows {
        let v = parse_f64(*line, &r[cv], "value")?;
        table.insert(resolve(&index, &r[cs])?, resolve(&index, &r[cd])?, v)?;
    }
    Ok(table)
}

pub fn write_nodes_csv(pop: &Population) -> Result<String> {
    let mut header: Vec<String> = ["id", "age", "z"].map(String::from).to_vec();
    header.extend(pop.attrs().keys().cloned());
    let rows = (0..pop.n()).map(|i| {
        let mut r = vec![
            pop.ids()[i].clone(),
            pop.ages()[i].to_string(),
            pop.infection()[i].to_string(),
        ];
        for col in pop.attrs().values() {
            r.push(match col {
                AttrColumn::Numeric(v) => v[i].to_string(),
                AttrColumn::Categorical { codes, levels } => levels[codes[i] as usize].clone(),
            });
        }
        r
    });
    write_csv(&header, rows)
}

pub fn write_edges_csv(pop: &Population) -> Result<String> {
    let header = ["src", "dst"].map(String::from).to_vec();
    write_csv(
        &header,
        pop.edges()
            .map(|(a, b)| vec![pop.ids()[a].clone(), pop.ids()[b].clone()]),
    )
}

pub fn write_tie_table_csv(pop: &Population, table: &TieTable) -> Result<String> {
    let header = ["src", "dst", "value"].map(String::from).to_vec();
    write_csv(
        &header,
        table
            .entries()
            .into_iter()
            .map(|(a, b, v)| vec![pop.ids()[a].clone(), pop.ids()[b].clone(), v.to_string()]),
    )
}

const MEMBER_FIXED: [&str; 5] = ["id", "recruiter_id", "wave", "degree", "z"];
const ALTER_FIXED: [&str; 3] = ["ego_id", "alter_index", "alter_id"];

/// Member table `id,recruiter_id,wave,degree,z[,values...]` and alter table
/// `ego_id,alter_index,alter_id[,values...]`.
pub fn write_sample_csv(sample: &RdsSample) -> Result<(String, String)> {
    let member_cols: BTreeSet<&String> = sample
        .members
        .iter()
        .flat_map(|m| m.values.keys())
        .filter(|k| k.as_str() != "z")
        .collect();
    let mut header: Vec<String> = MEMBER_FIXED.map(String::from).to_vec();
    header.extend(member_cols.iter().map(|s| s.to_string()));
    let members = sample.members.iter().map(|m| {
        let mut r = vec![
            m.id.clone(),
            m.recruiter
                .map(|k| sample.members[k].id.clone())
                .unwrap_or_default(),
            m.wave.to_string(),
            m.degree.to_string(),
            m.z.to_string(),
        ];
        r.extend(
            member_cols
                .iter()
                .map(|c| m.values.get(*c).map(f64::to_string).unwrap_or_default()),
        );
        r
    });
    let members_csv = write_csv(&header, members)?;

    let alter_cols: BTreeSet<&String> = sample
        .members
        .iter()
        .flat_map(|m| m.alters.iter().flat_map(|a| a.values.keys()))
        .collect();
    let mut header: Vec<String> = ALTER_FIXED.map(String::from).to_vec();
    header.extend(alter_cols.iter().map(|s| s.to_string()));
    let alters = sample.members.iter().flat_map(|m| {
        m.alters.iter().enumerate().map(|(k, a)| {
            let mut r = vec![
                m.id.clone(),
                k.to_string(),
                a.member
                    .map(|k| sample.members[k].id.clone())
                    .unwrap_or_default(),
            ];
            r.extend(
                alter_cols
                    .iter()
                    .map(|c| a.values.get(*c).map(f64::to_string).unwrap_or_default()),
            );
            r
        })
    });
    Ok((members_csv, write_csv(&header, alters)?))
}

fn optional_values(
    line: usize,
    header: &[String],
    row: &[String],
    skip: &[usize],
) -> Result<BTreeMap<String, f64>> {
    let mut values = BTreeMap::new();
    for (c, name) in header.iter().enumerate() {
        if skip.contains(&c) || row[c].is_empty() {
            continue;
        }
        values.insert(name.clone(), parse_f64(line, &row[c], name)?);
    }
    Ok(values)
}

/// Reads a sample. Members are reordered by wave (stable) so that every
/// recruiter precedes its recruits; a `wave` column, when present, must
/// agree with the recruitment chains.
/// Waves implied by recruiter links, a wave-sorted order (stable within a
/// wave) and each original row's position in that order.
pub(crate) fn recruitment_order(
    ids: &[String],
    recruiter: &[Option<usize>],
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let n = ids.len();
    let mut wave: Vec<Option<usize>> = vec![None; n];
    for start in 0..n {
        let mut chain = Vec::new();
        let mut k = start;
        let base = loop {
            if let Some(w) = wave[k] {
                break w;
            }
            if chain.len() > n {
                return Err(Error::Data(format!(
                    "recruitment cycle through member `{}`",
                    ids[start]
                )));
            }
            chain.push(k);
            match recruiter[k] {
                None => {
                    wave[k] = Some(0);
                    chain.pop();
                    break 0;
                }
                Some(r) => k = r,
            }
        };
        for (depth, &c) in chain.iter().rev().enumerate() {
            wave[c] = Some(base + depth + 1);
        }
    }
    let wave: Vec<usize> = wave.into_iter().map(Option::unwrap).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| wave[k]);
    let mut position = vec![0; n];
    for (p, &k) in order.iter().enumerate() {
        position[k] = p;
    }
    Ok((wave, order, position))
}

pub fn parse_sample_csv(members_csv: &str, alters_csv: Option<&str>) -> Result<RdsSample> {
    let t = Table::parse(members_csv)?;
    let (ci, cr, cd, cz) = (
        t.require("id")?,
        t.require("recruiter_id")?,
        t.require("degree")?,
        t.require("z")?,
    );
    let cw = t.column("wave");
    let skip: Vec<usize> = [Some(ci), Some(cr), Some(cd), Some(cz), cw]
        .into_iter()
        .flatten()
        .collect();

    let ids: Vec<String> = t.rows.iter().map(|(_, r)| r[ci].clone()).collect();
    let index = id_index(&ids);
    if index.len() != ids.len() {
        return Err(Error::Data("duplicate member id".into()));
    }
    if let Some((line, _)) = t.rows.iter().find(|(_, r)| r[ci].is_empty()) {
        return Err(parse_err(*line, "empty id"));
    }
    let recruiter: Vec<Option<usize>> = t
        .rows
        .iter()
        .map(|(line, r)| {
            if r[cr].is_empty() {
                return Ok(None);
            }
            let k = index
                .get(r[cr].as_str())
                .copied()
                .ok_or_else(|| parse_err(*line, format!("unknown recruiter `{}`", r[cr])))?;
            Ok(Some(k))
        })
        .collect::<Result<_>>()?;

    let n = ids.len();
    let (wave, order, position) = recruitment_order(&ids, &recruiter)?;
    if let Some(cw) = cw {
        for (k, (line, r)) in t.rows.iter().enumerate() {
            if !r[cw].is_empty() && parse_usize(*line, &r[cw], "wave")? != wave[k] {
                return Err(parse_err(
                    *line,
                    format!(
                        "wave {} disagrees with recruitment chain ({})",
                        r[cw], wave[k]
                    ),
                ));
            }
        }
    }

    let mut members = order
        .iter()
        .map(|&k| {
            let (line, r) = &t.rows[k];
            Ok(Member {
                id: r[ci].clone(),
                node: None,
                recruiter: recruiter[k].map(|x| position[x]),
                wave: wave[k],
                degree: parse_usize(*line, &r[cd], "degree")?,
                z: parse_z(*line, &r[cz])?,
                values: optional_values(*line, &t.header, r, &skip)?,
                alters: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(text) = alters_csv {
        let a = Table::parse(text)?;
        let (ce, cx) = (a.require("ego_id")?, a.require("alter_index")?);
        let cl = a.column("alter_id");
        let skip: Vec<usize> = [Some(ce), Some(cx), cl].into_iter().flatten().collect();
        let mut rows: Vec<Vec<(usize, Alter)>> = vec![Vec::new(); n];
        for (line, r) in &a.rows {
            let ego = *index
                .get(r[ce].as_str())
                .ok_or_else(|| parse_err(*line, format!("unknown ego `{}`", r[ce])))?;
            let slot = parse_usize(*line, &r[cx], "alter_index")?;
            let member = match cl.map(|c| r[c].as_str()).filter(|s| !s.is_empty()) {
                None => None,
                Some(id) => {
                    let k = *index
                        .get(id)
                        .ok_or_else(|| parse_err(*line, format!("unknown alter member `{id}`")))?;
                    if recruiter[k] != Some(ego) && recruiter[ego] != Some(k) {
                        return Err(parse_err(
                            *line,
                            format!(
                                "alter `{id}` is neither recruiter nor recruit of `{}`",
                                r[ce]
                            ),
                        ));
                    }
                    Some(position[k])
                }
            };
            rows[ego].push((
                slot,
                Alter {
                    member,
                    values: optional_values(*line, &a.header, r, &skip)?,
                },
            ));
        }
        for (k, mut list) in rows.into_iter().enumerate() {
            list.sort_by_key(|x| x.0);
            if list.iter().enumerate().any(|(p, x)| x.0 != p) {
                return Err(Error::Data(format!(
                    "alter indices of `{}` are not 0..d-1",
                    ids[k]
                )));
            }
            members[position[k]].alters = list.into_iter().map(|x| x.1).collect();
        }
    }
    RdsSample::new(members)
}

/// Raw survey rows: `id,recruiter_id,gender,age,degree,degree_nonmale,degree_male`
/// followed by one count column per age group (`age_18_19`, ..., `age_80_plus`).
/// Empty `gender` marks a value to impute; empty count fields read as 0.
pub fn parse_survey_csv(text: &str) -> Result<Vec<RawRespondent>> {
    let t = Table::parse(text)?;
    let (ci, cr, cg, ca) = (
        t.require("id")?,
        t.require("recruiter_id")?,
        t.require("gender")?,
        t.require("age")?,
    );
    let (cd, cn, cm) = (
        t.require("degree")?,
        t.require("degree_nonmale")?,
        t.require("degree_male")?,
    );
    let age_cols: Vec<usize> = (0..AGE_GROUP_LOWER.len())
        .map(|g| t.require(&age_group_column(g)))
        .collect::<Result<_>>()?;
    let count = |line: usize, field: &str, what: &str| -> Result<u32> {
        if field.is_empty() {
            return Ok(0);
        }
        field
            .parse()
            .map_err(|_| parse_err(line, format!("{what}: `{field}` is not a count")))
    };
    t.rows
        .iter()
        .map(|(line, r)| {
            let line = *line;
            if r[ci].is_empty() {
                return Err(parse_err(line, "empty id"));
            }
            let gender = match r[cg].as_str() {
                "" => None,
                g => Some(
                    parse_z(line, g)
                        .map_err(|_| parse_err(line, format!("gender: `{g}` is not 0 or 1")))?,
                ),
            };
            Ok(RawRespondent {
                id: r[ci].clone(),
                recruiter_id: (!r[cr].is_empty()).then(|| r[cr].clone()),
                gender,
                age: parse_f64(line, &r[ca], "age")?,
                report: DegreeReport {
                    total: count(line, &r[cd], "degree")?,
                    by_gender: [
                        count(line, &r[cn], "degree_nonmale")?,
                        count(line, &r[cm], "degree_male")?,
                    ],
                    by_age: age_cols
                        .iter()
                        .map(|&c| count(line, &r[c], "age group"))
                        .collect::<Result<_>>()?,
                },
            })
        })
        .collect()
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{HomophilyLevel, PopulationRecipe};
    use crate::recruitment::RecruitmentModel;
    use crate::rng::from_seed;
    use crate::sampler::{run_rds, SamplingDesign};

    #[test]
    fn population_round_trip() {
        let mut t = TieTable::new();
        t.insert(0, 1, 2.5).unwrap();
        let pop = Population::from_edges(vec![20.5, 31.0, 44.25], vec![0, 1, 1], &[(0, 1), (1, 2)])
            .unwrap()
            .with_attr("edu", AttrColumn::Numeric(vec![1.0, 2.0, 3.0]))
            .unwrap()
            .with_attr(
                "sex",
                AttrColumn::Categorical {
                    codes: vec![0, 1, 0],
                    levels: vec!["f".into(), "m".into()],
                },
            )
            .unwrap();
        let nodes = write_nodes_csv(&pop).unwrap();
        let edges = write_edges_csv(&pop).unwrap();
        assert!(nodes.starts_with("id,age,z,edu,sex\n0,20.5,0,1,f\n"));
        let back = read_population(&nodes, &edges).unwrap();
        assert_eq!(back, pop);
        let tt = write_tie_table_csv(&pop, &t).unwrap();
        assert_eq!(parse_tie_table_csv(&tt, pop.ids()).unwrap(), t);
    }

    #[test]
    fn tie_table_asymmetry_is_an_error() {
        let ids: Vec<String> = vec!["a".into(), "b".into()];
        assert!(parse_tie_table_csv("src,dst,value\na,b,1\nb,a,1\n", &ids).is_ok());
        assert!(parse_tie_table_csv("src,dst,value\na,b,1\nb,a,2\n", &ids).is_err());
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(
            parse_nodes_csv("id,age\n1,20\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_nodes_csv("id,age,z\n1,20,2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_nodes_csv("id,age,z\n1,NaN,0\n"),
            Err(Error::Parse { .. })
        ));
        assert!(read_population("id,age,z\na,20,0\n", "src,dst\na,b\n").is_err());
        assert!(parse_sample_csv("id,recruiter_id,degree,z\na,b,2,0\nb,a,2,1\n", None).is_err());
    }

    #[test]
    fn sample_round_trip() {
        let pop = PopulationRecipe::new(1000, HomophilyLevel::High.ergm(), 4)
            .draw()
            .unwrap();
        let s = run_rds(
            &pop,
            &RecruitmentModel::Random,
            &SamplingDesign {
                n_target: 60,
                ..Default::default()
            },
            &mut from_seed(2),
        )
        .unwrap();
        let (m, a) = write_sample_csv(&s).unwrap();
        let back = parse_sample_csv(&m, Some(&a)).unwrap();
        assert_eq!(back.len(), s.len());
        for (x, y) in back.members.iter().zip(&s.members) {
            assert_eq!(
                (x.id.as_str(), x.recruiter, x.wave, x.degree, x.z),
                (y.id.as_str(), y.recruiter, y.wave, y.degree, y.z)
            );
            assert_eq!(x.values, y.values);
            assert_eq!(x.alters, y.alters);
        }
    }

    #[test]
    fn sample_reordering_and_waves() {
        let csv = "id,recruiter_id,degree,z\nc,b,1,0\nb,a,2,1\na,,1,0\n";
        let s = parse_sample_csv(csv, None).unwrap();
        let ids: Vec<&str> = s.members.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(s.members[2].recruiter, Some(1));
        assert_eq!(s.members[2].wave, 2);
        let bad_wave = "id,recruiter_id,wave,degree,z\na,,1,1,0\n";
        assert!(parse_sample_csv(bad_wave, None).is_err());
    }
}
