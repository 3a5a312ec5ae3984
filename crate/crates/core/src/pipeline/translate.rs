//! Translation between document dialects: parse, lower whatever the target
//! cannot state, and emit. Lowered constructs are written as packages with
//! synthetic names.

use crate::error::{Error, Result};
use crate::frontends::Dialect;
use crate::name::PackageName;

use super::{lower_stack, ExtendedInstance, LoweredBundle};

/// A translated document, with the lowering it went through if any.
#[derive(Clone, Debug)]
pub struct Translation {
    pub text: String,
    pub bundle: Option<LoweredBundle>,
}

/// Translates an instance into `to`. With `verbatim` false, an instance
/// that would need synthetic packages in the target is an error instead.
pub fn translate_instance(inst: &ExtendedInstance, to: Dialect, verbatim: bool) -> Result<Translation> {
    if inst.uses().into_iter().all(|t| to.supports(t)) {
        return Ok(Translation { text: to.emit(inst)?, bundle: None });
    }
    let bundle = lower_stack(inst, &inst.default_stack())?;
    if !verbatim {
        if let Some(n) = bundle.core.repo().names().find(|n| n.is_synthetic() && **n != PackageName::Root) {
            return Err(Error::Emit(format!("{to} cannot express {n} without synthetic packages")));
        }
    }
    let text = to.emit(&ExtendedInstance::from_core(&bundle.core))?;
    Ok(Translation { text, bundle: Some(bundle) })
}

pub fn translate(text: &str, from: Dialect, to: Dialect) -> Result<String> {
    let inst = from.parse(text)?;
    if from == to {
        return to.emit(&inst);
    }
    Ok(translate_instance(&inst, to, true)?.text)
}
