//! Compiler from equational hybrid models to explicit hybrid ODE models.

pub mod bta;
pub mod corpus;
pub mod explicit;
pub mod label;
pub mod lang;
pub mod model_json;
pub mod parser;
pub mod pipeline;
pub mod sim;
pub mod specialize;

pub use label::Label;
pub use lang::{Builtin, Constant, Equation, Expr, Type, TypeEnv, Variable};
pub use parser::{parse, parse_file, pretty, ParseError, ParsedProgram, SourceSpan};
