// SPDX-License-Identifier: Apache-2.0

//! Reading a subset of fields touches only the pages of their columns.

use std::sync::Arc;

use minituple::skim::{skim_input_schema, SkimEventGenerator};
use minituple::writer::sequential_write;
use minituple::{MemSink, Reader, WriterOptions};

fn main() -> minituple::Result<()> {
    let schema = skim_input_schema();
    let entries: Vec<_> = SkimEventGenerator::new(5).take(100_000).collect();
    let sink = MemSink::new();
    sequential_write(Arc::new(sink.clone()), schema, WriterOptions::default(), &entries)?;
    let bytes = sink.to_vec();

    let full = Reader::from_source(Arc::new(bytes.clone()))?;
    full.read_all()?;
    println!("full read:       {} pages", full.pages_read());

    let jets = Reader::from_source(Arc::new(bytes))?.with_projection(&["jets._0.pt"])?;
    let projected = jets.read_all()?;
    println!("jets._0.pt only:  {} pages, schema {}", jets.pages_read(), jets.output_schema().type_spec(0));
    let jets: usize = projected.iter().map(|e| e.as_record().unwrap()[0].as_collection().unwrap().len()).sum();
    println!("{} entries, {jets} jets", projected.len());
    Ok(())
}
