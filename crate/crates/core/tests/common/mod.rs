pub mod oracle;
pub mod recovery;
