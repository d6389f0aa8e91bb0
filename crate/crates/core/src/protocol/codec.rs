use super::{Ack, AckCode, Command, Direction, EncodeError, GripAction};

/// Largest arm coordinate magnitude on the wire, mm.
pub const MAX_ARM_MM: i32 = 9999;

const HEX: &[u8; 16] = b"0123456789ABCDEF";

pub fn checksum(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |acc, b| acc ^ b)
}

fn frame(body: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(body.as_bytes());
    let sum = checksum(body.as_bytes());
    out.push(b'*');
    out.push(HEX[(sum >> 4) as usize]);
    out.push(HEX[(sum & 0x0f) as usize]);
    out.push(b'\n');
    out
}

/// Reject values the wire cannot carry.
pub fn check_encodable(c: &Command) -> Result<(), EncodeError> {
    if let Command::ArmTo { x_mm, y_mm, z_mm } = *c {
        for v in [x_mm, y_mm, z_mm] {
            if v.unsigned_abs() > MAX_ARM_MM as u32 {
                return Err(EncodeError::ArmOutOfRange(v));
            }
        }
    }
    Ok(())
}

pub fn encode(c: &Command) -> Result<Vec<u8>, EncodeError> {
    check_encodable(c)?;
    Ok(frame(&c.to_string()))
}

pub fn encode_ack(a: &Ack) -> Vec<u8> {
    match a {
        Ack::Ok => frame("OK"),
        Ack::Err(code) => frame(&format!("ERR {}", code.get())),
    }
}

fn hex_value(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

/// Split a frame into its checked body. Shared by command and ack decoding.
fn unframe(line: &[u8]) -> Result<&[u8], AckCode> {
    let content = match line.split_last() {
        Some((b'\n', rest)) => rest,
        _ => return Err(AckCode::MALFORMED),
    };
    if content.contains(&b'\n') {
        return Err(AckCode::MALFORMED);
    }
    let star = content
        .iter()
        .position(|&b| b == b'*')
        .ok_or(AckCode::MALFORMED)?;
    let (body, tail) = (&content[..star], &content[star + 1..]);
    let [hi, lo] = tail else {
        return Err(AckCode::MALFORMED);
    };
    let (hi, lo) = match (hex_value(*hi), hex_value(*lo)) {
        (Some(h), Some(l)) => (h, l),
        _ => return Err(AckCode::MALFORMED),
    };
    if checksum(body) != (hi << 4 | lo) {
        return Err(AckCode::BAD_CHECKSUM);
    }
    Ok(body)
}

fn tokens(body: &[u8]) -> Result<Vec<&[u8]>, AckCode> {
    let parts: Vec<&[u8]> = body.split(|&b| b == b' ').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(AckCode::MALFORMED);
    }
    Ok(parts)
}

/// Canonical decimal integer: optional `-`, no leading zeros, no `-0`.
/// Syntax errors are `MALFORMED`, values beyond `i64` are `OUT_OF_RANGE`.
fn parse_int(tok: &[u8]) -> Result<i64, AckCode> {
    let (neg, digits) = match tok.split_first() {
        Some((b'-', rest)) => (true, rest),
        _ => (false, tok),
    };
    if digits.is_empty() || !digits.iter().all(u8::is_ascii_digit) {
        return Err(AckCode::MALFORMED);
    }
    if digits.len() > 1 && digits[0] == b'0' {
        return Err(AckCode::MALFORMED);
    }
    if neg && digits == b"0" {
        return Err(AckCode::MALFORMED);
    }
    let mut value: i64 = 0;
    for d in digits {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add(i64::from(d - b'0')))
            .ok_or(AckCode::OUT_OF_RANGE)?;
    }
    Ok(if neg { -value } else { value })
}

fn arity(args: &[&[u8]], n: usize) -> Result<(), AckCode> {
    if args.len() == n {
        Ok(())
    } else {
        Err(AckCode::MALFORMED)
    }
}

/// Strict parse of one command frame. Total over arbitrary input.
pub fn decode(line: &[u8]) -> Result<Command, AckCode> {
    let body = unframe(line)?;
    let toks = tokens(body)?;
    let (verb, args) = toks.split_first().ok_or(AckCode::MALFORMED)?;
    match *verb {
        b"MOV" => {
            arity(args, 2)?;
            let speed = parse_int(args[1])?;
            let dir = Direction::from_token(args[0]).ok_or(AckCode::OUT_OF_RANGE)?;
            let speed = u8::try_from(speed).map_err(|_| AckCode::OUT_OF_RANGE)?;
            Ok(Command::Move { dir, speed })
        }
        b"STP" => arity(args, 0).map(|_| Command::Stop),
        b"HOM" => arity(args, 0).map(|_| Command::Home),
        b"ARM" => {
            arity(args, 3)?;
            let mut v = [0i32; 3];
            for (slot, tok) in v.iter_mut().zip(args) {
                let n = parse_int(tok)?;
                if n.unsigned_abs() > MAX_ARM_MM as u64 {
                    return Err(AckCode::OUT_OF_RANGE);
                }
                *slot = n as i32;
            }
            Ok(Command::ArmTo {
                x_mm: v[0],
                y_mm: v[1],
                z_mm: v[2],
            })
        }
        b"GRP" => {
            arity(args, 1)?;
            match args[0] {
                b"O" => Ok(Command::Grip(GripAction::Open)),
                b"C" => Ok(Command::Grip(GripAction::Close)),
                _ => Err(AckCode::OUT_OF_RANGE),
            }
        }
        _ => Err(AckCode::UNKNOWN_VERB),
    }
}

/// Parse an acknowledgement frame.
pub fn decode_ack(line: &[u8]) -> Result<Ack, AckCode> {
    let body = unframe(line)?;
    let toks = tokens(body)?;
    match toks.as_slice() {
        [b"OK"] => Ok(Ack::Ok),
        [b"ERR", code] => {
            let n = parse_int(code)?;
            u8::try_from(n)
                .ok()
                .and_then(AckCode::new)
                .map(Ack::Err)
                .ok_or(AckCode::OUT_OF_RANGE)
        }
        [b"OK", ..] | [b"ERR", ..] => Err(AckCode::MALFORMED),
        _ => Err(AckCode::UNKNOWN_VERB),
    }
}
