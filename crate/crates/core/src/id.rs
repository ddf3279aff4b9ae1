use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque, URL-safe identifier.
///
/// Generated ids are ULIDs: 26 Crockford base32 characters carrying a
/// millisecond timestamp and 80 random bits, so they are unguessable but sort
/// roughly by creation time. Ids supplied from outside (student ids on a
/// roster) only need to be URL-safe.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Id(String);

impl Id {
    pub fn new() -> Self {
        Id(ulid::Ulid::new().to_string())
    }

    pub fn parse(raw: &str) -> Result<Self> {
        let ok = !raw.is_empty()
            && raw.len() <= 128
            && raw
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~'))
            && raw != "."
            && raw != "..";
        if ok {
            Ok(Id(raw.to_owned()))
        } else {
            Err(Error::Validation(format!("`{raw}` is not a valid id")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for Id {
    fn default() -> Self {
        Id::new()
    }
}

/// Fresh random identifier.
pub fn new_id() -> Id {
    Id::new()
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Id {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Id::parse(s)
    }
}

impl AsRef<str> for Id {
    fn as_ref(&self) -> &str {
        &self.0
    }
}
