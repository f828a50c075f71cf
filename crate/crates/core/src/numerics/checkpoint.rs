//! Named parameter sets and their on-disk form: a text manifest of
//! `name<TAB>shape` lines, a blank line, then the values as little-endian
//! `f64`, in manifest order.

use std::io::{BufRead, Write};

use super::tensor::Tensor;
use super::NumericsError;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, t: Tensor) -> usize {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            self.tensors[i] = t;
            return i;
        }
        self.names.push(name.to_string());
        self.tensors.push(t);
        self.names.len() - 1
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<(), NumericsError> {
        for (name, t) in self.names.iter().zip(&self.tensors) {
            let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            writeln!(w, "{name}\t{}", shape.join(","))?;
        }
        writeln!(w)?;
        for t in &self.tensors {
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: BufRead>(mut r: R) -> Result<Self, NumericsError> {
        let mut manifest = Vec::new();
        loop {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(NumericsError::Checkpoint("manifest not terminated".into()));
            }
            let line = line.trim_end_matches('\n');
            if line.is_empty() {
                break;
            }
            let (name, shape) = line
                .split_once('\t')
                .ok_or_else(|| NumericsError::Checkpoint(format!("bad manifest line {line:?}")))?;
            let shape: Vec<usize> = shape
                .split(',')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| NumericsError::Checkpoint(format!("bad shape in {line:?}")))?;
            manifest.push((name.to_string(), shape));
        }
        let mut store = ParamStore::new();
        for (name, shape) in manifest {
            let count: usize = shape.iter().product();
            let mut bytes = vec![0u8; count * 8];
            r.read_exact(&mut bytes)
                .map_err(|_| NumericsError::Checkpoint(format!("truncated data for {name}")))?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            store.insert(&name, Tensor::new(shape, data)?);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(NumericsError::Checkpoint("trailing bytes after data".into()));
        }
        Ok(store)
    }
}
