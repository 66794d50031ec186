//! Dataset files: one metadata object, then one JSON object per record.
//!
//! ```text
//! {"n":2,"nu":1,"nm":3,"seed":7,"state":"ising:N=2"}
//! {"r":1,"setting":"XZ","shots":["00","01","00"]}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Bitstring, Dataset, DatasetMeta, MeasurementRecord, Outcomes};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct MetaLine {
    n: usize,
    nu: usize,
    nm: usize,
    seed: u64,
    state: String,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    r: usize,
    setting: String,
    shots: Vec<String>,
}

pub fn write_dataset<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    let nm = ds
        .meta
        .nm
        .ok_or_else(|| Error::Argument("exact-mode datasets have no shot data to save".into()))?;
    let meta = MetaLine {
        n: ds.meta.n,
        nu: ds.meta.nu,
        nm,
        seed: ds.meta.seed,
        state: ds.meta.state.clone(),
    };
    serde_json::to_writer(&mut out, &meta)?;
    out.write_all(b"\n")?;
    for rec in &ds.records {
        let Outcomes::Shots(shots) = &rec.outcomes else {
            return Err(Error::Argument("exact-mode record in a sampled dataset".into()));
        };
        let line = RecordLine {
            r: rec.r,
            setting: rec.setting.to_string(),
            shots: shots.iter().map(|&s| Bitstring::new(s, ds.meta.n).to_string()).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut lines = BufReader::new(input).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
    let meta: MetaLine = serde_json::from_str(&first)?;
    let mut records = Vec::with_capacity(meta.nu);
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rl: RecordLine = serde_json::from_str(&line)?;
        let setting = rl.setting.parse()?;
        let shots = rl
            .shots
            .iter()
            .map(|s| {
                let b: Bitstring = s.parse()?;
                if b.len() != meta.n {
                    return Err(Error::Parse(format!(
                        "line {}: bitstring `{s}` has length {}, expected {}",
                        lineno + 2,
                        b.len(),
                        meta.n
                    )));
                }
                Ok(b.index())
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(MeasurementRecord {
            r: rl.r,
            setting,
            outcomes: Outcomes::Shots(shots),
        });
    }
    Dataset::new(
        DatasetMeta {
            n: meta.n,
            nu: meta.nu,
            nm: Some(meta.nm),
            seed: meta.seed,
            state: meta.state,
        },
        records,
    )
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::sample_dataset;
    use crate::qcore::DensityState;
    use proptest::prelude::*;

    #[test]
    fn format_is_as_documented() {
        let ds = Dataset::new(
            DatasetMeta {
                n: 2,
                nu: 1,
                nm: Some(3),
                seed: 7,
                state: "ising:N=2".into(),
            },
            vec![MeasurementRecord {
                r: 1,
                setting: "XZ".parse().unwrap(),
                outcomes: Outcomes::Shots(vec![0, 1, 0]),
            }],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"n\":2,\"nu\":1,\"nm\":3,\"seed\":7,\"state\":\"ising:N=2\"}\n\
             {\"r\":1,\"setting\":\"XZ\",\"shots\":[\"00\",\"01\",\"00\"]}\n"
        );
    }

    #[test]
    fn malformed_files_are_rejected() {
        let bad_len = "{\"n\":2,\"nu\":1,\"nm\":1,\"seed\":0,\"state\":\"\"}\n{\"r\":1,\"setting\":\"XZ\",\"shots\":[\"000\"]}\n";
        assert!(read_dataset(bad_len.as_bytes()).is_err());
        let missing = "{\"n\":2,\"nu\":2,\"nm\":1,\"seed\":0,\"state\":\"\"}\n{\"r\":1,\"setting\":\"XZ\",\"shots\":[\"00\"]}\n";
        assert!(read_dataset(missing.as_bytes()).is_err());
        assert!(read_dataset("".as_bytes()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn save_load_is_lossless(nu in 1usize..6, nm in 1usize..8, seed in any::<u64>(), n in 1usize..4) {
            let state = DensityState::maximally_mixed(n).unwrap();
            let ds = sample_dataset(&state, nu, nm, seed, "mm").unwrap();
            let mut buf = Vec::new();
            write_dataset(&ds, &mut buf).unwrap();
            let back = read_dataset(buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &ds);
            let mut again = Vec::new();
            write_dataset(&back, &mut again).unwrap();
            prop_assert_eq!(buf, again);
        }
    }
}
