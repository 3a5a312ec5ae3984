//! Python bindings. Documents cross the boundary as text in any supported
//! dialect; resolutions come back as JSON resolution documents.

use pkgcalc::frontends::json::{emit_resolution, parse_resolution, ResolutionDocument};
use pkgcalc::frontends::Dialect;
use pkgcalc::pipeline::translate::translate_instance;
use pkgcalc::pipeline::{lift_stack, lower_stack, validate_extended, ExtensionStack, LoweredBundle};
use pkgcalc::sat::{gen_from_3cnf, parse_dimacs, resolve as sat_resolve};
use pkgcalc::{maximal_resolutions, Oracle, Outcome};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(pkgcalc, Unresolvable, PyException, "The instance has no resolution.");

fn err(e: pkgcalc::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dialect(name: &str) -> PyResult<Dialect> {
    name.parse().map_err(err)
}

fn lowered(repo: &str, format: &str, stack: Option<&str>) -> PyResult<LoweredBundle> {
    let inst = dialect(format)?.parse(repo).map_err(err)?;
    let stack = match stack {
        Some(s) => s.parse::<ExtensionStack>().map_err(err)?,
        None => inst.default_stack(),
    };
    lower_stack(&inst, &stack).map_err(err)
}

/// Resolve a repository document and return the resolution as JSON.
///
/// Raises `Unresolvable` when there is none and `ValueError` on bad input.
#[pyfunction]
#[pyo3(signature = (repo, format = "json", prefer_fresh = false, brute = false, stack = None))]
fn resolve(repo: &str, format: &str, prefer_fresh: bool, brute: bool, stack: Option<&str>) -> PyResult<String> {
    let bundle = lowered(repo, format, stack)?;
    let outcome = if brute {
        let all = Oracle::default().enumerate(&bundle.core).map_err(err)?;
        let all = if prefer_fresh { maximal_resolutions(&all).map_err(err)? } else { all };
        all.into_iter().next().map_or(Outcome::Unresolvable("no resolution".into()), Outcome::Resolved)
    } else {
        sat_resolve(&bundle.core, prefer_fresh).map_err(err)?
    };
    match outcome {
        Outcome::Resolved(s) => {
            let r = lift_stack(&s, &bundle).map_err(err)?;
            emit_resolution(&ResolutionDocument::from_extended(&r)).map_err(err)
        }
        Outcome::Unresolvable(reason) => Err(Unresolvable::new_err(reason)),
    }
}

/// Every resolution of the lowered instance, lifted, as JSON documents.
#[pyfunction]
#[pyo3(signature = (repo, format = "json", limit = 1000))]
fn enumerate(repo: &str, format: &str, limit: usize) -> PyResult<Vec<String>> {
    let bundle = lowered(repo, format, None)?;
    let oracle = Oracle { limit, ..Oracle::default() };
    let mut out = Vec::new();
    for s in oracle.enumerate(&bundle.core).map_err(err)? {
        let r = lift_stack(&s, &bundle).map_err(err)?;
        let text = emit_resolution(&ResolutionDocument::from_extended(&r)).map_err(err)?;
        if !out.contains(&text) {
            out.push(text);
        }
    }
    out.sort();
    Ok(out)
}

/// Names of the rules a resolution document breaks; empty when it is valid.
#[pyfunction]
#[pyo3(signature = (repo, resolution, format = "json"))]
fn violations(repo: &str, resolution: &str, format: &str) -> PyResult<Vec<String>> {
    let bundle = lowered(repo, format, None)?;
    let r = parse_resolution(resolution).and_then(|d| d.to_extended()).map_err(err)?;
    let report = validate_extended(&bundle, &r).map_err(err)?;
    Ok(report.violations.iter().map(ToString::to_string).collect())
}

#[pyfunction]
#[pyo3(signature = (text, source, target, strict = false))]
fn translate(text: &str, source: &str, target: &str, strict: bool) -> PyResult<String> {
    let inst = dialect(source)?.parse(text).map_err(err)?;
    Ok(translate_instance(&inst, dialect(target)?, !strict).map_err(err)?.text)
}

/// Repository document whose resolvability is the satisfiability of a DIMACS formula.
#[pyfunction]
#[pyo3(signature = (dimacs, format = "json"))]
fn gen_3sat(dimacs: &str, format: &str) -> PyResult<String> {
    let inst = gen_from_3cnf(&parse_dimacs(dimacs).map_err(err)?).map_err(err)?;
    dialect(format)?.emit(&pkgcalc::pipeline::ExtendedInstance::from_core(&inst)).map_err(err)
}

#[pymodule]
#[pyo3(name = "pkgcalc")]
fn pkgcalc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("Unresolvable", m.py().get_type::<Unresolvable>())?;
    m.add_function(wrap_pyfunction!(resolve, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(violations, m)?)?;
    m.add_function(wrap_pyfunction!(translate, m)?)?;
    m.add_function(wrap_pyfunction!(gen_3sat, m)?)?;
    Ok(())
}
