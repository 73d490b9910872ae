//! Bundled coupling tables of four published eight-spin bath realizations.
//! `table1` is the main-text environment; `table2`..`table4` are the
//! alternate realizations evaluated at 3 T.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::{env_from_csv, sha256_hex};
use crate::lattice::EnvironmentRealization;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Table1,
    Table2,
    Table3,
    Table4,
}

impl Fixture {
    pub const ALL: [Fixture; 4] = [Fixture::Table1, Fixture::Table2, Fixture::Table3, Fixture::Table4];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Table1 => "table1",
            Fixture::Table2 => "table2",
            Fixture::Table3 => "table3",
            Fixture::Table4 => "table4",
        }
    }

    pub fn csv(self) -> &'static str {
        match self {
            Fixture::Table1 => include_str!("../fixtures/table1.csv"),
            Fixture::Table2 => include_str!("../fixtures/table2.csv"),
            Fixture::Table3 => include_str!("../fixtures/table3.csv"),
            Fixture::Table4 => include_str!("../fixtures/table4.csv"),
        }
    }

    pub fn sha256(self) -> &'static str {
        match self {
            Fixture::Table1 => "dd1da0f8f3ed7664460e4ac8a047c712c095ae94dfb5862b6f2c57fb77713c8c",
            Fixture::Table2 => "d61f10cea7a2d66daf2367d613737a08a6eddfe8fabcdae0b13643314ff40569",
            Fixture::Table3 => "f164e0b9d72bf3ed19fcc806b2bee926fdce28798cbc5aa9455cbbe0f75a1a99",
            Fixture::Table4 => "1b9462c1a45392a59061660de1ae75b7111177cbe18edd5c1db3d3cd139673a2",
        }
    }

    /// Unpolarized environment at `field_t`.
    pub fn environment(self, field_t: f64) -> Result<EnvironmentRealization> {
        env_from_csv(self.csv(), field_t)
    }
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Fixture::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown fixture `{s}` (expected table1..table4)")))
    }
}

/// Checks every bundled table against its recorded checksum.
pub fn verify_fixtures() -> Result<()> {
    for f in Fixture::ALL {
        let actual = sha256_hex(f.csv().as_bytes());
        if actual != f.sha256() {
            return Err(Error::Validation(format!(
                "fixture {} checksum mismatch: {actual}",
                f.name()
            )));
        }
    }
    Ok(())
}
