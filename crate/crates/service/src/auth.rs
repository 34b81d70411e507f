//! File-based users with PBKDF2-SHA256 password hashes, and bearer sessions.
//!
//! A users file holds one user per line:
//! `username:pbkdf2-sha256:<iterations>:<salt hex>:<digest hex>`.
//! Blank lines and lines starting with `#` are ignored.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::RwLock;

use chrono::{DateTime, Duration, Utc};
use rand::rngs::OsRng;
use rand::RngCore;
use sha2::Sha256;
use subtle::ConstantTimeEq;

pub const ALGORITHM: &str = "pbkdf2-sha256";
pub const MIN_ITERATIONS: u32 = 100_000;
pub const DEFAULT_ITERATIONS: u32 = 210_000;
const SALT_BYTES: usize = 16;
const DIGEST_BYTES: usize = 32;
const TOKEN_BYTES: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum AuthError {
    #[error("cannot read users file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("users file line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserCredential {
    pub username: String,
    pub iterations: u32,
    pub salt: Vec<u8>,
    pub digest: Vec<u8>,
}

fn derive(password: &str, salt: &[u8], iterations: u32) -> [u8; DIGEST_BYTES] {
    let mut out = [0u8; DIGEST_BYTES];
    pbkdf2::pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, iterations, &mut out);
    out
}

impl UserCredential {
    /// Hashes `password` under a fresh random salt.
    pub fn create(username: &str, password: &str, iterations: u32) -> Result<Self, String> {
        if username.is_empty() || username.contains([':', '\n', '\r']) {
            return Err("username must be non-empty and contain no ':' or newline".into());
        }
        if iterations < MIN_ITERATIONS {
            return Err(format!("iterations must be at least {MIN_ITERATIONS}"));
        }
        let mut salt = vec![0u8; SALT_BYTES];
        OsRng.fill_bytes(&mut salt);
        let digest = derive(password, &salt, iterations).to_vec();
        Ok(Self {
            username: username.to_string(),
            iterations,
            salt,
            digest,
        })
    }

    pub fn verify(&self, password: &str) -> bool {
        let candidate = derive(password, &self.salt, self.iterations);
        candidate.ct_eq(&self.digest).into()
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}:{ALGORITHM}:{}:{}:{}",
            self.username,
            self.iterations,
            hex::encode(&self.salt),
            hex::encode(&self.digest)
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let parts: Vec<&str> = line.split(':').collect();
        let [username, algorithm, iterations, salt, digest] = parts[..] else {
            return Err(format!("expected 5 ':'-separated fields, found {}", parts.len()));
        };
        if algorithm != ALGORITHM {
            return Err(format!("unsupported algorithm `{algorithm}`"));
        }
        let iterations: u32 = iterations
            .parse()
            .map_err(|_| format!("iteration count `{iterations}` is not a number"))?;
        if iterations < MIN_ITERATIONS {
            return Err(format!("iteration count {iterations} is below {MIN_ITERATIONS}"));
        }
        let salt = hex::decode(salt).map_err(|e| format!("salt: {e}"))?;
        let digest = hex::decode(digest).map_err(|e| format!("digest: {e}"))?;
        if salt.is_empty() || digest.len() != DIGEST_BYTES {
            return Err("salt must be non-empty and the digest 32 bytes".into());
        }
        if username.is_empty() {
            return Err("empty username".into());
        }
        Ok(Self {
            username: username.to_string(),
            iterations,
            salt,
            digest,
        })
    }
}

#[derive(Debug)]
pub struct UserStore {
    users: HashMap<String, UserCredential>,
    /// Checked against when the username is unknown so both failure paths
    /// cost one key derivation.
    decoy: UserCredential,
}

impl UserStore {
    pub fn new(users: Vec<UserCredential>) -> Result<Self, AuthError> {
        let mut salts = HashSet::new();
        let mut map = HashMap::new();
        for (i, u) in users.into_iter().enumerate() {
            if !salts.insert(u.salt.clone()) {
                return Err(AuthError::Format {
                    line: i + 1,
                    message: format!("salt of `{}` is reused", u.username),
                });
            }
            if map.contains_key(&u.username) {
                return Err(AuthError::Format {
                    line: i + 1,
                    message: format!("duplicate user `{}`", u.username),
                });
            }
            map.insert(u.username.clone(), u);
        }
        let decoy = UserCredential::create("decoy", "", MIN_ITERATIONS).expect("valid decoy");
        Ok(Self { users: map, decoy })
    }

    pub fn parse(text: &str) -> Result<Self, AuthError> {
        let mut users = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            users.push(UserCredential::parse_line(line).map_err(|message| AuthError::Format {
                line: i + 1,
                message,
            })?);
        }
        Self::new(users)
    }

    pub fn load(path: &Path) -> Result<Self, AuthError> {
        let text = std::fs::read_to_string(path).map_err(|source| AuthError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn authenticate(&self, username: &str, password: &str) -> bool {
        match self.users.get(username) {
            Some(u) => u.verify(password),
            None => {
                let _ = self.decoy.verify(password);
                false
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    pub username: String,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

/// Bearer tokens of 128 random bits, hex encoded.
#[derive(Debug)]
pub struct SessionStore {
    ttl: Duration,
    sessions: RwLock<HashMap<String, Session>>,
}

impl SessionStore {
    pub fn new(ttl: std::time::Duration) -> Self {
        Self {
            ttl: Duration::from_std(ttl).unwrap_or(Duration::MAX),
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn issue(&self, username: &str) -> (String, Session) {
        let mut bytes = [0u8; TOKEN_BYTES];
        OsRng.fill_bytes(&mut bytes);
        let token = hex::encode(bytes);
        let now = Utc::now();
        let session = Session {
            username: username.to_string(),
            issued_at: now,
            expires_at: now.checked_add_signed(self.ttl).unwrap_or(DateTime::<Utc>::MAX_UTC),
        };
        let mut map = self.sessions.write().expect("session lock poisoned");
        map.retain(|_, s| s.expires_at > now);
        map.insert(token.clone(), session.clone());
        (token, session)
    }

    /// The session behind `token`, if it exists and has not expired.
    pub fn validate(&self, token: &str) -> Option<Session> {
        let now = Utc::now();
        let map = self.sessions.read().expect("session lock poisoned");
        map.get(token).filter(|s| now < s.expires_at).cloned()
    }
}
