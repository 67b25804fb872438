use std::fmt::Write as _;

use super::{BenchRecord, CostProfile};
use crate::dco::Family;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "dataset,dco,params,ef,k,recall,mean_us,qps,p_d,p_v,fn_ratio,hops,T,preprocess_us";

/// Parsed benchmark output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvContents {
    pub config: Option<String>,
    pub costs: Vec<CostProfile>,
    pub records: Vec<BenchRecord>,
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Baseline => "baseline",
        Family::Transformation => "transformation",
        Family::Projection => "projection",
        Family::Quantization => "quantization",
        Family::Geometry => "geometry",
    }
}

fn parse_family(s: &str) -> Option<Family> {
    Some(match s {
        "baseline" => Family::Baseline,
        "transformation" => Family::Transformation,
        "projection" => Family::Projection,
        "quantization" => Family::Quantization,
        "geometry" => Family::Geometry,
        _ => return None,
    })
}

fn check_name(s: &str) -> Result<&str> {
    if s.is_empty() || s.contains(char::is_whitespace) {
        return Err(Error::invalid(format!("operator label '{s}' must be a non-empty word")));
    }
    Ok(s)
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Format {
        format: "csv",
        reason: e.to_string(),
    }
}

/// Renders the commented config line, one `# cost:` line per operator and
/// the table.
pub fn write_csv(config: &str, costs: &[CostProfile], records: &[BenchRecord]) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "# config: {}", config.replace(['\n', '\r'], " ")).unwrap();
    for c in costs {
        writeln!(
            out,
            "# cost: dco={} family={} dim={} full_us={} f_d_us={} f_v_us={}",
            check_name(&c.dco)?,
            family_name(c.family),
            c.dim,
            c.full_us,
            c.f_d_us,
            c.f_v_us
        )
        .unwrap();
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).map_err(csv_error)?;
    for r in records {
        w.write_record([
            r.dataset.clone(),
            r.dco.clone(),
            r.params.clone(),
            r.ef.to_string(),
            r.k.to_string(),
            r.recall.to_string(),
            r.mean_us.to_string(),
            r.qps.to_string(),
            r.p_d.to_string(),
            r.p_v.to_string(),
            r.fn_ratio.map(|v| v.to_string()).unwrap_or_default(),
            r.hops.to_string(),
            r.t.to_string(),
            r.preprocess_us.to_string(),
        ])
        .map_err(csv_error)?;
    }
    let table = w.into_inner().map_err(csv_error)?;
    out.push_str(std::str::from_utf8(&table).map_err(csv_error)?);
    Ok(out)
}

fn bad(line: usize, reason: impl std::fmt::Display) -> Error {
    Error::Format {
        format: "csv",
        reason: format!("line {line}: {reason}"),
    }
}

fn num<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| bad(line, format!("{name} = '{s}' is not a number")))
}

fn parse_cost(line: usize, body: &str) -> Result<CostProfile> {
    let mut fields = std::collections::HashMap::new();
    for kv in body.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(line, format!("'{kv}' is not key=value")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(line, format!("cost line lacks {k}")));
    Ok(CostProfile {
        dco: get("dco")?.to_string(),
        family: parse_family(get("family")?).ok_or_else(|| bad(line, "unknown family"))?,
        dim: num(line, "dim", get("dim")?)?,
        full_us: num(line, "full_us", get("full_us")?)?,
        f_d_us: num(line, "f_d_us", get("f_d_us")?)?,
        f_v_us: num(line, "f_v_us", get("f_v_us")?)?,
    })
}

pub fn parse_csv(text: &str) -> Result<CsvContents> {
    let mut out = CsvContents::default();
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim_start();
            if let Some(c) = rest.strip_prefix("config:") {
                out.config = Some(c.trim().to_string());
            } else if let Some(c) = rest.strip_prefix("cost:") {
                out.costs.push(parse_cost(i + 1, c)?);
            }
        }
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_error)?;
    if header.iter().ne(CSV_HEADER.split(',')) {
        return Err(bad(0, "unexpected header"));
    }
    for row in r.records() {
        let f = row.map_err(csv_error)?;
        let n = f.position().map_or(0, |p| p.line() as usize);
        if f.len() != 14 {
            return Err(bad(n, format!("{} fields, expected 14", f.len())));
        }
        out.records.push(BenchRecord {
            dataset: f[0].to_string(),
            dco: f[1].to_string(),
            params: f[2].to_string(),
            ef: num(n, "ef", &f[3])?,
            k: num(n, "k", &f[4])?,
            recall: num(n, "recall", &f[5])?,
            mean_us: num(n, "mean_us", &f[6])?,
            qps: num(n, "qps", &f[7])?,
            p_d: num(n, "p_d", &f[8])?,
            p_v: num(n, "p_v", &f[9])?,
            fn_ratio: if f[10].is_empty() { None } else { Some(num(n, "fn_ratio", &f[10])?) },
            hops: num(n, "hops", &f[11])?,
            t: num(n, "T", &f[12])?,
            preprocess_us: num(n, "preprocess_us", &f[13])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(ef: usize, fn_ratio: Option<f64>) -> BenchRecord {
        BenchRecord {
            dataset: "toy".into(),
            dco: "pca".into(),
            params: "delta_d=32".into(),
            ef,
            k: 20,
            recall: 0.975,
            mean_us: 123.5,
            qps: 1e6 / 123.5,
            p_d: 0.61,
            p_v: 0.93,
            fn_ratio,
            hops: 40.25,
            t: 512.0,
            preprocess_us: 3.5,
        }
    }

    #[test]
    fn roundtrip() {
        let costs = vec![CostProfile {
            dco: "pca".into(),
            family: Family::Transformation,
            dim: 128,
            full_us: 0.05,
            f_d_us: 0.0004,
            f_v_us: 0.01,
        }];
        let recs = vec![record(10, None), record(20, Some(0.0))];
        let text = write_csv("data.base=x.fvecs bench.k=20", &costs, &recs).unwrap();
        assert!(text.starts_with("# config: "));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.records, recs);
        assert_eq!(back.costs, costs);
        assert_eq!(back.config.as_deref(), Some("data.base=x.fvecs bench.k=20"));
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_csv("").is_err());
        assert!(parse_csv("a,b\n").is_err());
        let text = format!("{CSV_HEADER}\ntoy,pca,x,10\n");
        assert!(parse_csv(&text).is_err());
        let mut r = record(10, None);
        r.params = "a,b".into();
        let back = parse_csv(&write_csv("", &[], &[r.clone()]).unwrap()).unwrap();
        assert_eq!(back.records, vec![r]);
    }
}
