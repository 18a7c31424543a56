//! NMEA 0183 sentence framing for AIVDM/AIVDO.
//!
//! A sentence looks like `!AIVDM,2,1,3,B,<payload>,0*5C`; the checksum is the
//! XOR of every character between the leading `!`/`$` and the `*`. An
//! optional TAG block (`\c:1530648000*5D\`) may precede the sentence; its
//! `c:` field carries the receiver timestamp in UTC seconds.

use super::IngestError;

#[derive(Debug, Clone, PartialEq)]
pub struct NmeaFrame {
    /// Talker + sentence tag, e.g. `AIVDM`.
    pub tag: String,
    pub fragment_count: u8,
    pub fragment_index: u8,
    /// Sequential message id linking the fragments of one message.
    pub message_id: Option<u8>,
    /// Radio channel designator (`A`, `B`, `1`, `2`).
    pub channel: Option<char>,
    pub payload: String,
    pub fill_bits: u8,
    pub checksum: u8,
    /// Receiver timestamp from the TAG block `c:` field, UTC seconds.
    pub tag_time: Option<i64>,
}

fn xor_checksum(body: &str) -> u8 {
    body.bytes().fold(0u8, |acc, b| acc ^ b)
}

fn parse_hex_u8(s: &str) -> Option<u8> {
    if s.len() != 2 {
        return None;
    }
    u8::from_str_radix(s, 16).ok()
}

/// Splits an optional leading TAG block off and returns `(tag_time, rest)`.
fn split_tag_block(line: &str) -> Result<(Option<i64>, &str), IngestError> {
    if !line.starts_with('\\') {
        return Ok((None, line));
    }
    let inner_and_rest = &line[1..];
    let end = inner_and_rest
        .find('\\')
        .ok_or_else(|| IngestError::Parse("unterminated tag block".into()))?;
    let inner = &inner_and_rest[..end];
    let rest = &inner_and_rest[end + 1..];

    // the checksum inside the block covers everything before its '*'
    let fields = match inner.rsplit_once('*') {
        Some((body, cks)) => {
            let stated = parse_hex_u8(cks)
                .ok_or_else(|| IngestError::Parse("bad tag block checksum".into()))?;
            let computed = xor_checksum(body);
            if stated != computed {
                return Err(IngestError::Checksum { computed, stated });
            }
            body
        }
        None => inner,
    };

    let mut tag_time = None;
    for field in fields.split(',') {
        if let Some(value) = field.strip_prefix("c:") {
            let secs: i64 = value
                .parse()
                .map_err(|_| IngestError::Parse(format!("bad tag time {value:?}")))?;
            tag_time = Some(secs);
        }
    }
    Ok((tag_time, rest))
}

/// Parses one line into a frame, validating structure and checksum.
/// Leading/trailing whitespace is tolerated.
pub fn parse_sentence(line: &str) -> Result<NmeaFrame, IngestError> {
    let line = line.trim();
    if line.is_empty() {
        return Err(IngestError::Parse("empty line".into()));
    }
    let (tag_time, line) = split_tag_block(line)?;

    if !line.starts_with('!') && !line.starts_with('$') {
        return Err(IngestError::Parse("missing start delimiter".into()));
    }
    let body_and_cks = &line[1..];
    let (body, cks_text) = body_and_cks
        .rsplit_once('*')
        .ok_or_else(|| IngestError::Parse("missing checksum delimiter".into()))?;
    let stated = parse_hex_u8(cks_text.trim())
        .ok_or_else(|| IngestError::Parse(format!("bad checksum field {cks_text:?}")))?;
    let computed = xor_checksum(body);
    if computed != stated {
        return Err(IngestError::Checksum { computed, stated });
    }

    let fields: Vec<&str> = body.split(',').collect();
    if fields.len() != 7 {
        return Err(IngestError::Parse(format!(
            "expected 7 fields, got {}",
            fields.len()
        )));
    }
    let tag = fields[0].to_string();
    if !tag.ends_with("VDM") && !tag.ends_with("VDO") {
        return Err(IngestError::Parse(format!("not an AIS sentence: {tag}")));
    }

    let fragment_count: u8 = fields[1]
        .parse()
        .map_err(|_| IngestError::Parse(format!("bad fragment count {:?}", fields[1])))?;
    let fragment_index: u8 = fields[2]
        .parse()
        .map_err(|_| IngestError::Parse(format!("bad fragment index {:?}", fields[2])))?;
    if fragment_count == 0 || fragment_index == 0 || fragment_index > fragment_count {
        return Err(IngestError::Parse(format!(
            "fragment {fragment_index}/{fragment_count} out of range"
        )));
    }

    let message_id = if fields[3].is_empty() {
        None
    } else {
        Some(
            fields[3]
                .parse()
                .map_err(|_| IngestError::Parse(format!("bad message id {:?}", fields[3])))?,
        )
    };
    let channel = fields[4].chars().next();
    let payload = fields[5].to_string();
    if payload.is_empty() {
        return Err(IngestError::Parse("empty payload".into()));
    }
    let fill_bits: u8 = fields[6]
        .parse()
        .map_err(|_| IngestError::Parse(format!("bad fill bits {:?}", fields[6])))?;
    if fill_bits > 5 {
        return Err(IngestError::Parse(format!("fill bits {fill_bits} > 5")));
    }

    Ok(NmeaFrame {
        tag,
        fragment_count,
        fragment_index,
        message_id,
        channel,
        payload,
        fill_bits,
        checksum: stated,
        tag_time,
    })
}

/// Builds a checksummed sentence from parts; inverse of [`parse_sentence`]
/// for the generator side.
pub fn format_sentence(
    tag: &str,
    fragment_count: u8,
    fragment_index: u8,
    message_id: Option<u8>,
    channel: char,
    payload: &str,
    fill_bits: u8,
) -> String {
    let id = message_id.map(|i| i.to_string()).unwrap_or_default();
    let body =
        format!("{tag},{fragment_count},{fragment_index},{id},{channel},{payload},{fill_bits}");
    format!("!{body}*{:02X}", xor_checksum(&body))
}

/// Wraps a sentence in a TAG block carrying the receive time.
pub fn with_tag_block(sentence: &str, unix_seconds: i64) -> String {
    let body = format!("c:{unix_seconds}");
    format!("\\{body}*{:02X}\\{sentence}", xor_checksum(&body))
}

#[cfg(test)]
mod tests {
    use super::*;

    // well-formed single-fragment sentence from the public AIS test corpora
    const SAMPLE: &str = "!AIVDM,1,1,,B,177KQJ5000G?tO`K>RA1wUbN0TKH,0*5C";

    #[test]
    fn parses_well_formed_sentence() {
        let f = parse_sentence(SAMPLE).unwrap();
        assert_eq!(f.tag, "AIVDM");
        assert_eq!(f.fragment_count, 1);
        assert_eq!(f.fragment_index, 1);
        assert_eq!(f.message_id, None);
        assert_eq!(f.channel, Some('B'));
        assert_eq!(f.payload, "177KQJ5000G?tO`K>RA1wUbN0TKH");
        assert_eq!(f.fill_bits, 0);
        assert_eq!(f.tag_time, None);
    }

    #[test]
    fn tolerates_surrounding_whitespace() {
        let f = parse_sentence(&format!("  {SAMPLE}\r\n")).unwrap();
        assert_eq!(f.payload, "177KQJ5000G?tO`K>RA1wUbN0TKH");
    }

    #[test]
    fn empty_line_is_parse_error() {
        assert!(matches!(parse_sentence(""), Err(IngestError::Parse(_))));
        assert!(matches!(parse_sentence("   "), Err(IngestError::Parse(_))));
    }

    #[test]
    fn flipped_checksum_digit_is_checksum_error() {
        let bad = SAMPLE.replace("*5C", "*5D");
        assert!(matches!(
            parse_sentence(&bad),
            Err(IngestError::Checksum { .. })
        ));
    }

    #[test]
    fn corrupted_body_is_checksum_error() {
        let bad = SAMPLE.replace("177KQJ", "177KQK");
        assert!(matches!(
            parse_sentence(&bad),
            Err(IngestError::Checksum { .. })
        ));
    }

    #[test]
    fn fragment_index_bounds_checked() {
        let body = "AIVDM,1,2,,B,177KQJ5000G?tO`K>RA1wUbN0TKH,0";
        let line = format!("!{body}*{:02X}", xor_checksum(body));
        assert!(matches!(parse_sentence(&line), Err(IngestError::Parse(_))));
    }

    #[test]
    fn tag_block_time_extracted() {
        let line = with_tag_block(SAMPLE, 1_530_648_000);
        let f = parse_sentence(&line).unwrap();
        assert_eq!(f.tag_time, Some(1_530_648_000));
    }

    #[test]
    fn tag_block_checksum_verified() {
        let line = with_tag_block(SAMPLE, 1_530_648_000);
        // corrupt one digit of the tag time while keeping its checksum
        let bad = line.replace("c:1530648000", "c:1530648001");
        assert!(matches!(
            parse_sentence(&bad),
            Err(IngestError::Checksum { .. })
        ));
    }

    #[test]
    fn format_round_trips() {
        let s = format_sentence("AIVDM", 2, 1, Some(3), 'A', "55?MbV02;H;s<HtKR20EHE", 0);
        let f = parse_sentence(&s).unwrap();
        assert_eq!(f.fragment_count, 2);
        assert_eq!(f.message_id, Some(3));
        assert_eq!(f.payload, "55?MbV02;H;s<HtKR20EHE");
    }
}
