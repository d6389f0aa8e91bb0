/// Longest accepted line, newline included.
pub const MAX_LINE_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    /// A complete line including its trailing `\n`.
    Line(Vec<u8>),
    /// A line grew past [`MAX_LINE_LEN`]; its bytes are dropped up to the
    /// next newline.
    Oversize,
}

/// Reassembles lines from a byte stream delivered in arbitrary chunks.
/// One splitter per link endpoint.
#[derive(Debug, Default, Clone)]
pub struct FrameSplitter {
    buf: Vec<u8>,
    discarding: bool,
}

impl FrameSplitter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, chunk: &[u8]) -> Vec<Frame> {
        let mut out = Vec::new();
        for &b in chunk {
            if self.discarding {
                if b == b'\n' {
                    self.discarding = false;
                }
                continue;
            }
            self.buf.push(b);
            if b == b'\n' {
                out.push(Frame::Line(std::mem::take(&mut self.buf)));
            } else if self.buf.len() >= MAX_LINE_LEN {
                self.buf.clear();
                self.discarding = true;
                out.push(Frame::Oversize);
            }
        }
        out
    }

    /// Bytes of the incomplete line held so far.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reassembles_across_chunks() {
        let mut s = FrameSplitter::new();
        assert!(s.push(b"ST").is_empty());
        assert_eq!(s.pending(), 2);
        assert_eq!(s.push(b"P*57\n"), vec![Frame::Line(b"STP*57\n".to_vec())]);
    }

    #[test]
    fn splits_two_lines() {
        let mut s = FrameSplitter::new();
        let frames = s.push(b"A\nB\n");
        assert_eq!(
            frames,
            vec![Frame::Line(b"A\n".to_vec()), Frame::Line(b"B\n".to_vec())]
        );
    }

    #[test]
    fn oversize_line_dropped_once() {
        let mut s = FrameSplitter::new();
        let long = vec![b'X'; 200];
        let mut frames = s.push(&long);
        frames.extend(s.push(b"\nSTP*57\n"));
        assert_eq!(
            frames,
            vec![Frame::Oversize, Frame::Line(b"STP*57\n".to_vec())]
        );
    }

    #[test]
    fn longest_legal_line() {
        let mut s = FrameSplitter::new();
        let mut line = vec![b'A'; MAX_LINE_LEN - 1];
        line.push(b'\n');
        assert_eq!(s.push(&line), vec![Frame::Line(line.clone())]);
        let mut too_long = vec![b'A'; MAX_LINE_LEN];
        too_long.push(b'\n');
        assert_eq!(s.push(&too_long), vec![Frame::Oversize]);
        assert_eq!(s.pending(), 0);
    }
}
