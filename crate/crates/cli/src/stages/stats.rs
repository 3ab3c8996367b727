use std::path::Path;

use qpc_core::fixtures::table3_items;
use qpc_core::store::read_store;
use qpc_core::{DatasetManifest, JsonlStore, ProvenanceGroup};

use crate::args::StatsArgs;
use crate::error::{CliError, Result};

pub fn manifest(args: &StatsArgs) -> Result<DatasetManifest> {
    match (&args.store, args.fixture.as_deref()) {
        (Some(dir), _) => Ok(DatasetManifest::from_items(&read_store(dir)?)),
        (None, Some("table3")) => Ok(DatasetManifest::from_items(&table3_items())),
        (None, Some(other)) => Err(CliError::Data(format!("unknown fixture `{other}`"))),
        (None, None) => Err(CliError::Data("give --store or --fixture".into())),
    }
}

pub fn render(m: &DatasetManifest) -> String {
    let row = |name: &str, c: &qpc_core::LabelCounts| {
        format!(
            "{:<48} {:>8} {:>8} {:>9} {:>8}\n",
            name, c.positive, c.negative, c.unlabeled, c.total
        )
    };
    let mut out = format!(
        "{:<48} {:>8} {:>8} {:>9} {:>8}\n",
        "combination", "positive", "negative", "unlabeled", "total"
    );
    for (key, c) in &m.combinations {
        out.push_str(&row(&key.canonical(), c));
    }
    out.push('\n');
    for g in [
        ProvenanceGroup::LlmAided,
        ProvenanceGroup::HumanSource,
        ProvenanceGroup::Auxiliary,
    ] {
        let name = match g {
            ProvenanceGroup::LlmAided => "llm-aided",
            ProvenanceGroup::HumanSource => "human-source",
            ProvenanceGroup::Auxiliary => "auxiliary",
        };
        out.push_str(&row(name, &m.group(g)));
    }
    out.push_str(&format!("total {}\n", m.total));
    out
}

pub fn run(args: &StatsArgs) -> Result<DatasetManifest> {
    let m = manifest(args)?;
    if args.json {
        println!("{}", m.to_pretty_json());
    } else {
        print!("{}", render(&m));
    }
    Ok(m)
}

pub fn write_table3(out: &Path) -> Result<usize> {
    let store = JsonlStore::create_fresh(out)?;
    let items = table3_items();
    let n = items.len();
    store.append_batch(items)?;
    Ok(n)
}
