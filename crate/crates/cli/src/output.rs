//! CSV rendering with stable number formatting.

/// Shortest string that parses back to `x`; empty for NaN.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

/// Comma-separated rows with `\n` line endings. Fields are never quoted,
/// so they must not contain commas.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut c = Csv { buf: String::new() };
        c.row(header.iter().map(|h| h.as_ref().to_string()));
        c
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        let mut first = true;
        for f in fields {
            if !first {
                self.buf.push(',');
            }
            debug_assert!(!f.contains(','));
            self.buf.push_str(&f);
            first = false;
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}
