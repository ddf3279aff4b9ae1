//! Bearer tokens. Only the SHA-256 of a token is stored.

use chrono::{DateTime, Duration, Utc};
use rand::distributions::Alphanumeric;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::id::Id;
use crate::store::Store;

pub const DEFAULT_TOKEN_TTL_HOURS: i64 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PrincipalRole {
    Instructor,
    Student,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub id: Id,
    pub role: PrincipalRole,
}

impl Principal {
    pub fn instructor(id: Id) -> Self {
        Self {
            id,
            role: PrincipalRole::Instructor,
        }
    }

    pub fn student(id: Id) -> Self {
        Self {
            id,
            role: PrincipalRole::Student,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub token_hash: Id,
    pub principal: Principal,
    pub created_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

/// A freshly issued token; the plain text is only available here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthToken {
    pub token: String,
    pub principal: Principal,
    pub expires_at: DateTime<Utc>,
}

fn hash_token(token: &str) -> Id {
    Id::parse(&hex::encode(Sha256::digest(token.as_bytes()))).expect("hex is a valid id")
}

pub fn issue_token(store: &Store, principal: Principal, ttl: Duration) -> Result<AuthToken> {
    let token: String = rand::thread_rng()
        .sample_iter(&Alphanumeric)
        .take(43)
        .map(char::from)
        .collect();
    let now = Utc::now();
    let record = TokenRecord {
        token_hash: hash_token(&token),
        principal: principal.clone(),
        created_at: now,
        expires_at: now + ttl,
    };
    store.tokens.put(&record)?;
    Ok(AuthToken {
        token,
        principal,
        expires_at: record.expires_at,
    })
}

/// Resolves a bearer token; unknown and expired tokens are both `UNAUTHORIZED`.
pub fn authenticate(store: &Store, token: &str) -> Result<Principal> {
    if token.is_empty() || token.len() > 256 {
        return Err(Error::Unauthorized);
    }
    match store.tokens.get(&hash_token(token)) {
        Ok(rec) if rec.expires_at > Utc::now() => Ok(rec.principal),
        Ok(_) | Err(Error::NotFound { .. }) => Err(Error::Unauthorized),
        Err(e) => Err(e),
    }
}
