//! Bearer tokens.
//!
//! A token is `rcd1.<therapist uuid>.<expiry unix seconds>.<nonce>.<hex hmac>`,
//! the MAC taken with SHA-256 over everything before the last dot. The
//! random nonce keeps two tokens issued in the same second distinct. The store
//! keeps only the SHA-256 of the most recently issued token per therapist,
//! so issuing a new token revokes the old one.

use chrono::{DateTime, TimeZone, Utc};
use hmac::{Hmac, KeyInit, Mac};
use recuerdame_core::domain::TherapistAccount;
use recuerdame_core::ids::TherapistId;
use recuerdame_core::service::Clinic;
use sha2::{Digest, Sha256};

const PREFIX: &str = "rcd1";

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthFailure {
    Missing,
    Malformed,
    BadSignature,
    Expired,
    Revoked,
    UnknownTherapist,
}

#[derive(Clone)]
pub struct TokenKey {
    secret: Vec<u8>,
}

impl TokenKey {
    pub fn new(secret: &[u8]) -> Self {
        Self {
            secret: secret.to_vec(),
        }
    }

    fn mac(&self, payload: &str) -> HmacSha256 {
        let mut mac = HmacSha256::new_from_slice(&self.secret).expect("HMAC accepts any key length");
        mac.update(payload.as_bytes());
        mac
    }

    pub fn issue(&self, therapist: TherapistId, expires_at: DateTime<Utc>) -> String {
        let nonce = hex::encode(rand::random::<[u8; 16]>());
        let payload = format!("{PREFIX}.{therapist}.{}.{nonce}", expires_at.timestamp());
        let sig = hex::encode(self.mac(&payload).finalize().into_bytes());
        format!("{payload}.{sig}")
    }

    /// Checks format, signature and expiry. Does not consult the store.
    pub fn verify(&self, token: &str, now: DateTime<Utc>) -> Result<TherapistId, AuthFailure> {
        let (payload, sig) = token.rsplit_once('.').ok_or(AuthFailure::Malformed)?;
        let mut parts = payload.split('.');
        let (Some(PREFIX), Some(id), Some(exp), Some(_nonce), None) =
            (parts.next(), parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(AuthFailure::Malformed);
        };
        let sig = hex::decode(sig).map_err(|_| AuthFailure::Malformed)?;
        self.mac(payload)
            .verify_slice(&sig)
            .map_err(|_| AuthFailure::BadSignature)?;
        let id: TherapistId = id.parse().map_err(|_| AuthFailure::Malformed)?;
        let exp: i64 = exp.parse().map_err(|_| AuthFailure::Malformed)?;
        let exp = Utc.timestamp_opt(exp, 0).single().ok_or(AuthFailure::Malformed)?;
        if now >= exp {
            return Err(AuthFailure::Expired);
        }
        Ok(id)
    }
}

/// What the store keeps for a token.
pub fn credential_digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

/// Issues a token for `therapist` and records its digest, replacing any
/// earlier credential.
pub fn provision(
    clinic: &Clinic,
    key: &TokenKey,
    therapist: TherapistId,
    expires_at: DateTime<Utc>,
) -> recuerdame_core::error::Result<String> {
    let token = key.issue(therapist, expires_at);
    clinic.set_credential(therapist, credential_digest(&token))?;
    Ok(token)
}

/// Resolves an `Authorization` header value to the account it names.
pub fn authenticate(clinic: &Clinic, key: &TokenKey, header: Option<&str>) -> Result<TherapistAccount, AuthFailure> {
    let header = header.ok_or(AuthFailure::Missing)?;
    let token = header
        .strip_prefix("Bearer ")
        .or_else(|| header.strip_prefix("bearer "))
        .ok_or(AuthFailure::Malformed)?
        .trim();
    let id = key.verify(token, clinic.now())?;
    match clinic.credential_digest(id) {
        Some(stored) if stored == credential_digest(token) => {}
        _ => return Err(AuthFailure::Revoked),
    }
    clinic.therapist(id).map_err(|_| AuthFailure::UnknownTherapist)
}
