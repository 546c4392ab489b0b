//! SHA-256 content fingerprints for tables, transforms and point sets.

use sha2::{Digest, Sha256};

pub(crate) struct Fingerprinter(Sha256);

impl Fingerprinter {
    pub fn new(domain: &str) -> Self {
        let mut h = Self(Sha256::new());
        h.str(domain);
        h
    }

    pub fn u64(&mut self, x: u64) {
        self.0.update(x.to_le_bytes());
    }

    pub fn f64(&mut self, x: f64) {
        self.0.update(x.to_bits().to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.update(s.as_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.0.update(b);
    }

    pub fn finish(self) -> String {
        let digest = self.0.finalize();
        let mut out = String::with_capacity(7 + 64);
        out.push_str("sha256:");
        for byte in digest.iter() {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}
