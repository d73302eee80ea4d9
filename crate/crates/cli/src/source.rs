//! Model sources and map selectors.

use blv_core::io::ModelDocument;
use blv_core::zoo::{self, slice, symmetric, ProductComponent, ZooSpec};
use blv_core::{Error, FactorMap, FiniteMarkovModel, Result};

#[derive(clap::Args, Debug, Clone)]
pub struct SourceArgs {
    /// `zoo:symmetric-group`, `zoo:slice`, `zoo:product`, `zoo:cyclic`, or a
    /// path to a model JSON document.
    pub source: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Product component sizes, e.g. `2x3`.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Cyclic generators, e.g. `1,5`.
    #[arg(long)]
    pub generators: Option<String>,
    /// Map selectors separated by `;`: `coords`, `file`, `restrict:1,2`,
    /// `image:1,2`, `proj:1,2`, `hypergeo:2,2/2`, `colors:2,2/2`, `slice:K`.
    /// Defaults to `coords` for zoo models and `file` for documents.
    #[arg(long)]
    pub maps: Option<String>,
}

pub struct Loaded {
    pub model: FiniteMarkovModel,
    pub maps: Vec<FactorMap>,
}

fn need(v: Option<usize>, flag: &str) -> Result<usize> {
    v.ok_or_else(|| Error::InvalidParameter(format!("--{flag} is required for this model")))
}

fn usize_list(s: &str) -> Result<Vec<usize>> {
    s.split([',', 'x'])
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("bad integer '{t}'"))))
        .collect()
}

pub fn zoo_spec(kind: &str, args: &SourceArgs) -> Result<ZooSpec> {
    match kind {
        "symmetric-group" | "symmetric_group" => Ok(ZooSpec::SymmetricGroup { n: need(args.n, "n")? }),
        "slice" => Ok(ZooSpec::Slice { n: need(args.n, "n")?, k: need(args.k, "k")? }),
        "product" => {
            let sizes = args.sizes.as_deref().ok_or_else(|| Error::InvalidParameter("--sizes is required".into()))?;
            Ok(ZooSpec::Product {
                components: usize_list(sizes)?.into_iter().map(|size| ProductComponent { size, measure: None }).collect(),
            })
        }
        "cyclic" => {
            let gens = args.generators.as_deref().unwrap_or("1");
            ZooSpec::parse_short(&format!("cyclic:{}:{gens}", need(args.n, "n")?))
        }
        other => Err(Error::Parse(format!("unknown zoo model '{other}'"))),
    }
}

pub fn load(args: &SourceArgs) -> Result<Loaded> {
    let is_file = !args.source.starts_with("zoo:");
    let (model, default_maps) = match args.source.strip_prefix("zoo:") {
        Some(kind) => {
            let built = zoo_spec(kind, args)?.build()?;
            (built.model, built.maps)
        }
        None => {
            let text = std::fs::read_to_string(&args.source)
                .map_err(|source| Error::Io { path: args.source.clone(), source })?;
            ModelDocument::from_json(&text)?.build()?
        }
    };
    let mut maps = Vec::new();
    let selectors = args.maps.as_deref().unwrap_or(if is_file { "file" } else { "coords" });
    for sel in selectors.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        maps.extend(select(&model, &default_maps, is_file, sel)?);
    }
    Ok(Loaded { model, maps })
}

fn colors_and_draw(spec: &str) -> Result<(Vec<usize>, usize)> {
    let (colors, draw) =
        spec.split_once('/').ok_or_else(|| Error::Parse(format!("expected COUNTS/DRAW, got '{spec}'")))?;
    let draw = draw.trim().parse().map_err(|_| Error::Parse(format!("bad draw size '{draw}'")))?;
    Ok((usize_list(colors)?, draw))
}

fn select(model: &FiniteMarkovModel, defaults: &[FactorMap], is_file: bool, sel: &str) -> Result<Vec<FactorMap>> {
    let (head, arg) = sel.split_once(':').unwrap_or((sel, ""));
    match head {
        "coords" if !is_file => Ok(defaults.to_vec()),
        "coords" => slice::coordinate_maps(model),
        "file" if is_file => Ok(defaults.to_vec()),
        "file" => Err(Error::InvalidParameter("selector 'file' needs a model document".into())),
        "restrict" => Ok(vec![zoo::restriction_map(model, &usize_list(arg)?)?]),
        "image" => Ok(vec![zoo::image_map(model, &usize_list(arg)?)?]),
        "proj" => Ok(vec![zoo::projection_map(model, &usize_list(arg)?, "proj")?]),
        "hypergeo" => {
            let (colors, draw) = colors_and_draw(arg)?;
            Ok(vec![zoo::hypergeometric_map(model, &colors, draw)?])
        }
        "colors" => {
            let (colors, draw) = colors_and_draw(arg)?;
            zoo::color_count_maps(model, &colors, draw)
        }
        "slice" => {
            let k = arg.trim().parse().map_err(|_| Error::Parse(format!("bad slice weight '{arg}'")))?;
            Ok(vec![symmetric::slice_indicator_map(model, k)?])
        }
        _ => Err(Error::Parse(format!("unknown map selector '{sel}'"))),
    }
}
