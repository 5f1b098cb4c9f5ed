pub mod oracle;
pub mod prompt_fixture;
