//! Reading and writing symbol files.
//!
//! A .wsym file holds either a bare tensor expression or a named graded
//! symbol in the canonical text form. Reading accepts text only; JSON is an
//! output format, so a leading brace is rejected with a pointed error rather
//! than a parser backtrace.

use std::fs;
use std::path::Path;

use weyl_core::{parse, print_expr, print_symbol, Format, GradedSymbol, Parsed, TensorExpr};

#[derive(Debug, thiserror::Error)]
pub enum WsymError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} starts with '{{': .wsym input is canonical text; JSON is write-only")]
    JsonInput { path: String },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path} holds a bare expression; this operation needs a graded symbol")]
    NotASymbol { path: String },
}

pub fn read(path: &Path) -> Result<Parsed, WsymError> {
    let text = fs::read_to_string(path).map_err(|source| WsymError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if text.trim_start().starts_with('{') {
        return Err(WsymError::JsonInput { path: path.display().to_string() });
    }
    parse(&text).map_err(|e| WsymError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_symbol(path: &Path) -> Result<(String, GradedSymbol), WsymError> {
    match read(path)? {
        Parsed::Symbol { name, symbol } => Ok((name, symbol)),
        Parsed::Expr(_) => Err(WsymError::NotASymbol { path: path.display().to_string() }),
    }
}

pub fn write_symbol(
    path: &Path,
    name: &str,
    sym: &GradedSymbol,
    format: Format,
) -> Result<(), WsymError> {
    let text = print_symbol(name, sym, format);
    fs::write(path, text).map_err(|source| WsymError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_expr(path: &Path, e: &TensorExpr, format: Format) -> Result<(), WsymError> {
    let text = print_expr(e, format);
    fs::write(path, text).map_err(|source| WsymError::Io {
        path: path.display().to_string(),
        source,
    })
}
