use std::path::PathBuf;

use molgen::chem::{read_smiles, write_smiles};
use molgen::synthetic::{synthetic_corpus, synthetic_properties, write_property_table};

const N: usize = 500;
const SEED: u64 = 0;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn expected() -> (Vec<u8>, Vec<u8>) {
    let smiles = synthetic_corpus(N, SEED);
    let rows = synthetic_properties(&smiles, SEED);
    let (mut smi, mut tsv) = (Vec::new(), Vec::new());
    write_smiles(&mut smi, &smiles).unwrap();
    write_property_table(&mut tsv, &smiles, &rows).unwrap();
    (smi, tsv)
}

#[test]
fn bundled_files_match_generator() {
    let (smi, tsv) = expected();
    assert_eq!(std::fs::read(data("synthetic.smi")).unwrap(), smi, "rerun the ignored `regenerate` test");
    assert_eq!(std::fs::read(data("synthetic_properties.tsv")).unwrap(), tsv);
    let read = read_smiles(smi.as_slice()).unwrap();
    assert_eq!(read.len(), N);
}

#[test]
#[ignore]
fn regenerate() {
    let (smi, tsv) = expected();
    std::fs::write(data("synthetic.smi"), smi).unwrap();
    std::fs::write(data("synthetic_properties.tsv"), tsv).unwrap();
}
