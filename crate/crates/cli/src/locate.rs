//! Maps a key path such as `trigger.detc.Theta` back to a line of the JSON
//! text it was parsed from.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Seg {
    Key(String),
    Index(usize),
}

impl Seg {
    pub fn render(path: &[Seg]) -> String {
        let mut s = String::new();
        for seg in path {
            match seg {
                Seg::Key(k) => {
                    if !s.is_empty() {
                        s.push('.');
                    }
                    s.push_str(k);
                }
                Seg::Index(i) => {
                    let _ = write!(s, "[{i}]");
                }
            }
        }
        s
    }
}

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl Scanner<'_> {
    fn skip_ws(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            match b {
                b'\n' => self.line += 1,
                b' ' | b'\t' | b'\r' => {}
                _ => return,
            }
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn string(&mut self) -> String {
        self.pos += 1;
        let start = self.pos;
        while let Some(b) = self.peek() {
            match b {
                b'\\' => self.pos += 2,
                b'"' => break,
                _ => self.pos += 1,
            }
        }
        let s = String::from_utf8_lossy(&self.bytes[start..self.pos.min(self.bytes.len())])
            .into_owned();
        self.pos += 1;
        s
    }

    /// Walks one value; returns the line of `target` if it lies inside.
    fn value(&mut self, path: &mut Vec<Seg>, target: &[Seg]) -> Option<usize> {
        self.skip_ws();
        if path.as_slice() == target {
            return Some(self.line);
        }
        match self.peek()? {
            b'{' => {
                self.pos += 1;
                loop {
                    self.skip_ws();
                    match self.peek()? {
                        b'}' => {
                            self.pos += 1;
                            return None;
                        }
                        b',' => self.pos += 1,
                        b'"' => {
                            let key_line = self.line;
                            let k = self.string();
                            path.push(Seg::Key(k));
                            if path.as_slice() == target {
                                return Some(key_line);
                            }
                            self.skip_ws();
                            self.pos += 1; // ':'
                            let found = self.value(path, target);
                            path.pop();
                            if found.is_some() {
                                return found;
                            }
                        }
                        _ => return None,
                    }
                }
            }
            b'[' => {
                self.pos += 1;
                let mut index = 0;
                loop {
                    self.skip_ws();
                    match self.peek()? {
                        b']' => {
                            self.pos += 1;
                            return None;
                        }
                        b',' => self.pos += 1,
                        _ => {
                            path.push(Seg::Index(index));
                            let found = self.value(path, target);
                            path.pop();
                            if found.is_some() {
                                return found;
                            }
                            index += 1;
                        }
                    }
                }
            }
            b'"' => {
                self.string();
                None
            }
            _ => {
                while let Some(b) = self.peek() {
                    if matches!(b, b',' | b']' | b'}') || b.is_ascii_whitespace() {
                        break;
                    }
                    self.pos += 1;
                }
                None
            }
        }
    }
}

/// 1-based line where the value at `path` starts (the key line for object
/// members), or the nearest enclosing value that exists.
pub fn locate(source: &str, path: &[Seg]) -> Option<usize> {
    for len in (0..=path.len()).rev() {
        let mut scanner = Scanner {
            bytes: source.as_bytes(),
            pos: 0,
            line: 1,
        };
        if let Some(line) = scanner.value(&mut Vec::new(), &path[..len]) {
            return Some(line);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(s: &str) -> Seg {
        Seg::Key(s.into())
    }

    #[test]
    fn finds_nested_members_and_elements() {
        let src = "{\n  \"a\": {\n    \"b\": [1,\n      2,\n      {\"c\": \"x\\\"y\"}]\n  },\n  \"d\": 3\n}";
        assert_eq!(locate(src, &[k("a")]), Some(2));
        assert_eq!(locate(src, &[k("a"), k("b"), Seg::Index(1)]), Some(4));
        assert_eq!(
            locate(src, &[k("a"), k("b"), Seg::Index(2), k("c")]),
            Some(5)
        );
        assert_eq!(locate(src, &[k("d")]), Some(7));
        // missing keys fall back to the enclosing value
        assert_eq!(locate(src, &[k("a"), k("zz")]), Some(2));
        assert_eq!(
            Seg::render(&[k("a"), k("b"), Seg::Index(2), k("c")]),
            "a.b[2].c"
        );
    }
}
