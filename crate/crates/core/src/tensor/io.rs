//! Text readers for the two interchange formats the benchmarks consume:
//! MatrixMarket coordinate files and whitespace-separated tensor files
//! (one coordinate tuple and value per line, 1-based).

use super::coo::CooBuffer;
use super::StoreError;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CooBuffer<f64>, StoreError> {
    parse_matrix_market(BufReader::new(File::open(path)?))
}

pub fn parse_matrix_market(reader: impl BufRead) -> Result<CooBuffer<f64>, StoreError> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file"))??;
    let fields: Vec<String> =
        header.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    let [banner, object, layout, field, symmetry] = fields.as_slice() else {
        return Err(bad(1, "header needs five fields"));
    };
    if banner != "%%matrixmarket" || object != "matrix" {
        return Err(bad(1, "not a MatrixMarket matrix file"));
    }
    if layout != "coordinate" {
        return Err(StoreError::Unsupported(format!("{layout} layout")));
    }
    let pattern = match field.as_str() {
        "real" | "integer" => false,
        "pattern" => true,
        other => return Err(StoreError::Unsupported(format!("{other} field"))),
    };
    let expand = match symmetry.as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(StoreError::Unsupported(format!("{other} symmetry"))),
    };

    let mut no = 1usize;
    let mut size: Option<(usize, usize, usize)> = None;
    let mut buf = CooBuffer::new(Vec::new());
    let mut stored = 0usize;
    for line in lines {
        let line = line?;
        no += 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        let words: Vec<&str> = text.split_whitespace().collect();
        match size {
            None => {
                let [r, c, n] = words[..] else {
                    return Err(bad(no, "size line needs rows cols nnz"));
                };
                let dims = (int(r, no)?, int(c, no)?, int(n, no)?);
                buf = CooBuffer::new(vec![dims.0, dims.1]);
                size = Some(dims);
            }
            Some((_, _, nnz)) => {
                let (coords, rest) = words.split_at_checked(2).ok_or_else(|| {
                    bad(no, "entry needs row and column")
                })?;
                let i = based(coords[0], no)?;
                let j = based(coords[1], no)?;
                let v = match (pattern, rest) {
                    (true, []) => 1.0,
                    (false, [w]) => {
                        w.parse::<f64>().map_err(|_| bad(no, "unreadable value"))?
                    }
                    _ => return Err(bad(no, "wrong entry width for field type")),
                };
                stored += 1;
                if stored > nnz {
                    return Err(StoreError::CountMismatch { header: nnz, actual: stored });
                }
                buf.push(vec![i, j], v)?;
                if expand && i != j {
                    buf.push(vec![j, i], v)?;
                }
            }
        }
    }
    let (_, _, nnz) = size.ok_or_else(|| bad(no, "missing size line"))?;
    if stored != nnz {
        return Err(StoreError::CountMismatch { header: nnz, actual: stored });
    }
    Ok(buf)
}

pub fn read_tns(path: impl AsRef<Path>) -> Result<CooBuffer<f64>, StoreError> {
    parse_tns(BufReader::new(File::open(path)?))
}

/// Coordinate lines without a header: dims are the largest index seen per
/// axis.
pub fn parse_tns(reader: impl BufRead) -> Result<CooBuffer<f64>, StoreError> {
    let mut entries: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut dims: Vec<usize> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let no = n + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') || text.starts_with('%') {
            continue;
        }
        let words: Vec<&str> = text.split_whitespace().collect();
        let (value_word, coord_words) =
            words.split_last().ok_or_else(|| bad(no, "blank entry"))?;
        if coord_words.is_empty() {
            return Err(bad(no, "entry needs at least one coordinate"));
        }
        if dims.is_empty() {
            dims = vec![0; coord_words.len()];
        } else if dims.len() != coord_words.len() {
            return Err(bad(no, "inconsistent coordinate count"));
        }
        let mut coords = Vec::with_capacity(coord_words.len());
        for (axis, w) in coord_words.iter().enumerate() {
            let c = based(w, no)?;
            dims[axis] = dims[axis].max(c + 1);
            coords.push(c);
        }
        let v = value_word.parse::<f64>().map_err(|_| bad(no, "unreadable value"))?;
        entries.push((coords, v));
    }
    CooBuffer::from_entries(dims, entries)
}

fn bad(line: usize, msg: &str) -> StoreError {
    StoreError::Malformed { line, msg: msg.to_string() }
}

fn int(word: &str, line: usize) -> Result<usize, StoreError> {
    word.parse::<usize>().map_err(|_| bad(line, "unreadable integer"))
}

fn based(word: &str, line: usize) -> Result<usize, StoreError> {
    let v = int(word, line)?;
    v.checked_sub(1).ok_or_else(|| bad(line, "indices are 1-based"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_header_expands_the_stored_triangle() {
        let text = "\
%%MatrixMarket matrix coordinate real symmetric
% a comment
3 3 1
1 2 5.0
";
        let buf = parse_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(buf.dims(), &[3, 3]);
        let mut entries = buf.entries().to_vec();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(entries, vec![(vec![0, 1], 5.0), (vec![1, 0], 5.0)]);
    }

    #[test]
    fn diagonal_entries_are_not_doubled_by_expansion() {
        let text = "\
%%MatrixMarket matrix coordinate integer symmetric
2 2 2
1 1 7
2 1 3
";
        let buf = parse_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(buf.len(), 3);
    }

    #[test]
    fn general_files_keep_entries_as_is() {
        let text = "\
%%MatrixMarket matrix coordinate real general
2 3 2
1 3 4.5
2 1 -1.0
";
        let buf = parse_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(buf.dims(), &[2, 3]);
        assert_eq!(buf.entries(), &[(vec![0, 2], 4.5), (vec![1, 0], -1.0)]);
    }

    #[test]
    fn pattern_files_store_unit_values() {
        let text = "\
%%MatrixMarket matrix coordinate pattern general
2 2 1
2 2
";
        let buf = parse_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(buf.entries(), &[(vec![1, 1], 1.0)]);
    }

    #[test]
    fn entry_count_must_match_the_header() {
        let text = "\
%%MatrixMarket matrix coordinate real general
2 2 3
1 1 1.0
2 2 2.0
";
        assert!(matches!(
            parse_matrix_market(text.as_bytes()),
            Err(StoreError::CountMismatch { header: 3, actual: 2 })
        ));
    }

    #[test]
    fn exotic_variants_are_refused() {
        for text in [
            "%%MatrixMarket matrix array real general\n2 2\n1.0\n",
            "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 2.0 0.0\n",
            "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 1.0\n",
        ] {
            assert!(matches!(
                parse_matrix_market(text.as_bytes()),
                Err(StoreError::Unsupported(_))
            ));
        }
        assert!(parse_matrix_market("%%MatrixMarket vector\n".as_bytes()).is_err());
    }

    #[test]
    fn tensor_files_infer_dims_from_the_largest_index() {
        let text = "\
# three-axis sample
1 1 2 1.5
3 1 1 2.0
1 2 2 -4.0
";
        let buf = parse_tns(text.as_bytes()).unwrap();
        assert_eq!(buf.dims(), &[3, 2, 2]);
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.entries()[1], (vec![2, 0, 0], 2.0));
    }

    #[test]
    fn tensor_files_are_one_based() {
        assert!(parse_tns("0 1 2.0\n".as_bytes()).is_err());
        assert!(parse_tns("1 2 2.0\n1 1 1 3.0\n".as_bytes()).is_err());
    }
}
