use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{is_blank_or_comment, malformed, parse_f64, read_lines, ParseError};
use crate::geodesy::{UtmCoord, UtmZone};

const HEADER: [&str; 4] = ["id", "easting", "northing", "height"];

/// Surveyed reference point, used only to verify accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub id: String,
    pub coord: UtmCoord,
}

/// Reads `id,easting,northing,height` rows. The file carries no zone; it
/// comes from the run configuration.
pub fn parse_checkpoints(source: impl Read, zone: UtmZone) -> Result<Vec<Checkpoint>, ParseError> {
    let mut lines = read_lines(source)?
        .into_iter()
        .filter(|(_, l)| !is_blank_or_comment(l));
    let (n, header) = lines.next().ok_or(ParseError::EmptyFile)?;
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
    if cols != HEADER {
        return Err(malformed(n, format!("expected header '{}'", HEADER.join(","))));
    }

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(malformed(n, format!("expected 4 fields, found {}", fields.len())));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(malformed(n, "empty checkpoint id"));
        }
        let easting = parse_f64(n, fields[1], "easting")?;
        let northing = parse_f64(n, fields[2], "northing")?;
        let height = parse_f64(n, fields[3], "height")?;
        if !(easting > 0.0 && easting < 1_000_000.0) {
            return Err(malformed(n, format!("easting {easting} outside (0, 1000000)")));
        }
        if !seen.insert(id.to_string()) {
            return Err(ParseError::DuplicateId {
                line: n,
                id: id.to_string(),
            });
        }
        out.push(Checkpoint {
            id: id.to_string(),
            coord: UtmCoord::new(easting, northing, height, zone),
        });
    }
    Ok(out)
}

pub fn write_checkpoints(cps: &[Checkpoint], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{}", HEADER.join(","))?;
    for cp in cps {
        writeln!(
            out,
            "{},{},{},{}",
            cp.id, cp.coord.easting, cp.coord.northing, cp.coord.height
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::geodesy::Hemisphere;

    fn zone() -> UtmZone {
        UtmZone::new(32, Hemisphere::North).unwrap()
    }

    #[test]
    fn one_checkpoint() {
        let cps = parse_checkpoints(
            "id,easting,northing,height\nCP01,512345.678,5404321.012,287.345\n".as_bytes(),
            zone(),
        )
        .unwrap();
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].id, "CP01");
        assert_eq!(cps[0].coord.easting, 512_345.678);
        assert_eq!(cps[0].coord.northing, 5_404_321.012);
        assert_eq!(cps[0].coord.height, 287.345);
        assert_eq!(cps[0].coord.zone, zone());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let src = "id,easting,northing,height\nCP01,500000,5400000,1\nCP01,500001,5400000,1\n";
        assert!(matches!(
            parse_checkpoints(src.as_bytes(), zone()),
            Err(ParseError::DuplicateId { line: 3, .. })
        ));
    }

    #[test]
    fn header_only_is_empty_list() {
        let cps = parse_checkpoints("id,easting,northing,height\n".as_bytes(), zone()).unwrap();
        assert!(cps.is_empty());
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(parse_checkpoints("".as_bytes(), zone()), Err(ParseError::EmptyFile)));
        assert!(matches!(
            parse_checkpoints("name,e,n,h\n".as_bytes(), zone()),
            Err(ParseError::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_checkpoints("id,easting,northing,height\nCP1,1,2\n".as_bytes(), zone()),
            Err(ParseError::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(
            parse_checkpoints("id,easting,northing,height\nCP1,-4,2,3\n".as_bytes(), zone()),
            Err(ParseError::MalformedLine { line: 2, .. })
        ));
    }

    #[test]
    fn write_then_parse() {
        let cps = vec![
            Checkpoint { id: "A".into(), coord: UtmCoord::new(513_223.539_353_1, 5_403_015.518_032, 287.1, zone()) },
            Checkpoint { id: "B".into(), coord: UtmCoord::new(500_000.0, 5_402_999.9, -0.25, zone()) },
        ];
        let mut buf = Vec::new();
        write_checkpoints(&cps, &mut buf).unwrap();
        assert_eq!(parse_checkpoints(buf.as_slice(), zone()).unwrap(), cps);
    }

    proptest! {
        #[test]
        fn never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
            let mut src = b"id,easting,northing,height\n".to_vec();
            src.extend(bytes);
            let _ = parse_checkpoints(src.as_slice(), zone());
        }
    }
}
