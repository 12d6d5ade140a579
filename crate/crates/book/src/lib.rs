//! The guide under `book/` compiled as doc-tests, so every snippet in it
//! keeps building and passing against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/hamiltonians.md")]
pub mod hamiltonians {}

#[doc = include_str!("../../../book/src/states.md")]
pub mod states {}

#[doc = include_str!("../../../book/src/estimators.md")]
pub mod estimators {}

#[doc = include_str!("../../../book/src/pencils.md")]
pub mod pencils {}

#[doc = include_str!("../../../book/src/solving.md")]
pub mod solving {}

#[doc = include_str!("../../../book/src/workflows.md")]
pub mod workflows {}

#[doc = include_str!("../../../book/src/conditioning.md")]
pub mod conditioning {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
