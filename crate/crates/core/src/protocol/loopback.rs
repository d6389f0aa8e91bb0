use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_encodable, decode, decode_ack, encode, encode_ack, Ack, AckCode, Command, Frame,
    FrameSplitter,
};

/// In-memory byte pipe. Splits every transmission into random chunks of
/// `1..=max_chunk` bytes (`0` disables chunking) and flips one random bit
/// of a transmission with probability `corruption_rate`.
#[derive(Debug, Clone)]
pub struct Loopback {
    pub max_chunk: usize,
    pub corruption_rate: f64,
    rng: ChaCha8Rng,
}

impl Loopback {
    pub fn new(max_chunk: usize, corruption_rate: f64, rng: ChaCha8Rng) -> Self {
        Self {
            max_chunk,
            corruption_rate,
            rng,
        }
    }

    pub fn transmit(&mut self, bytes: &[u8]) -> Vec<Vec<u8>> {
        let mut data = bytes.to_vec();
        if self.corruption_rate > 0.0
            && !data.is_empty()
            && self.rng.random_bool(self.corruption_rate.min(1.0))
        {
            let bit = self.rng.random_range(0..data.len() * 8);
            data[bit / 8] ^= 1 << (bit % 8);
        }
        if self.max_chunk == 0 {
            return vec![data];
        }
        let mut chunks = Vec::new();
        let mut rest = &data[..];
        while !rest.is_empty() {
            let n = self.rng.random_range(1..=self.max_chunk).min(rest.len());
            let (head, tail) = rest.split_at(n);
            chunks.push(head.to_vec());
            rest = tail;
        }
        chunks
    }
}

/// Carries commands to the actuator and acknowledgements back.
///
/// Both methods return what the receiving side decoded, or the error code
/// it would answer with.
pub trait Link {
    fn send_command(&mut self, c: &Command) -> Result<Command, AckCode>;
    fn send_ack(&mut self, a: &Ack) -> Result<Ack, AckCode>;
}

/// Hands values across without encoding. Commands the wire could not
/// carry are still refused, so both links agree.
#[derive(Debug, Default, Clone, Copy)]
pub struct DirectLink;

impl Link for DirectLink {
    fn send_command(&mut self, c: &Command) -> Result<Command, AckCode> {
        check_encodable(c).map_err(|_| AckCode::OUT_OF_RANGE)?;
        Ok(*c)
    }

    fn send_ack(&mut self, a: &Ack) -> Result<Ack, AckCode> {
        Ok(*a)
    }
}

/// Full wire path: encode, loopback, reassemble, decode, in both
/// directions. Each endpoint owns its splitter.
#[derive(Debug, Clone)]
pub struct WireLink {
    downlink: Loopback,
    uplink: Loopback,
    actuator_rx: FrameSplitter,
    planner_rx: FrameSplitter,
}

impl WireLink {
    pub fn new(downlink: Loopback, uplink: Loopback) -> Self {
        Self {
            downlink,
            uplink,
            actuator_rx: FrameSplitter::new(),
            planner_rx: FrameSplitter::new(),
        }
    }

    fn carry(
        pipe: &mut Loopback,
        rx: &mut FrameSplitter,
        bytes: &[u8],
    ) -> Result<Vec<u8>, AckCode> {
        let mut frames = Vec::new();
        for chunk in pipe.transmit(bytes) {
            frames.extend(rx.push(&chunk));
        }
        // Stop-and-wait: exactly one line per transmission.
        match frames.as_slice() {
            [Frame::Line(line)] => Ok(line.clone()),
            _ => Err(AckCode::MALFORMED),
        }
    }
}

impl Link for WireLink {
    fn send_command(&mut self, c: &Command) -> Result<Command, AckCode> {
        let bytes = encode(c).map_err(|_| AckCode::OUT_OF_RANGE)?;
        let line = Self::carry(&mut self.downlink, &mut self.actuator_rx, &bytes)?;
        decode(&line)
    }

    fn send_ack(&mut self, a: &Ack) -> Result<Ack, AckCode> {
        let line = Self::carry(&mut self.uplink, &mut self.planner_rx, &encode_ack(a))?;
        decode_ack(&line)
    }
}
