use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BlockStructure, CMat, Element, C64};
use crate::error::{Error, Result};

/// On-disk form of an [`Element`]:
/// `{"dims":[n1,…],"blocks":[[[ [re,im], … ], …], …]}`, blocks in `dims`
/// order, rows in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementFile {
    pub dims: Vec<usize>,
    pub blocks: Vec<Vec<Vec<[f64; 2]>>>,
}

impl From<&Element> for ElementFile {
    fn from(e: &Element) -> Self {
        let blocks = e
            .blocks()
            .iter()
            .map(|b| {
                (0..b.nrows())
                    .map(|r| {
                        (0..b.ncols())
                            .map(|c| {
                                let z = b[(r, c)];
                                [z.re + 0.0, z.im + 0.0]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            dims: e.structure().dims().to_vec(),
            blocks,
        }
    }
}

impl From<Element> for ElementFile {
    fn from(e: Element) -> Self {
        Self::from(&e)
    }
}

impl TryFrom<ElementFile> for Element {
    type Error = Error;

    fn try_from(file: ElementFile) -> Result<Self> {
        let structure = BlockStructure::new(file.dims)?;
        let mut raw = Vec::with_capacity(file.blocks.len());
        for (lambda, rows) in file.blocks.into_iter().enumerate() {
            let nrows = rows.len();
            let ncols = rows.first().map_or(0, |r| r.len());
            if rows.iter().any(|r| r.len() != ncols) {
                return Err(Error::ShapeMismatch(format!("block {lambda} has ragged rows")));
            }
            let entries: Vec<C64> = rows
                .into_iter()
                .flatten()
                .map(|[re, im]| C64::new(re, im))
                .collect();
            raw.push(CMat::from_row_slice(nrows, ncols, &entries));
        }
        Element::validate(&structure, raw)
    }
}

impl Element {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ElementFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Element::try_from(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ElementFile::from(self)).expect("element serialization")
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_format() {
        let text = r#"{"dims":[1,2],"blocks":[[[[2,0]]],[[[1,0],[0,1]],[[0,0],[-1,0]]]]}"#;
        let e = Element::from_json(text).unwrap();
        assert_eq!(e.structure().dims(), &[1, 2]);
        assert_eq!(e.block(1)[(0, 1)], C64::new(0.0, 1.0));
        assert_eq!(e.block(1)[(1, 1)], C64::new(-1.0, 0.0));
        assert_eq!(Element::from_json(&e.to_json()).unwrap(), e);
    }

    #[test]
    fn rejects_mismatched_blocks() {
        let text = r#"{"dims":[2],"blocks":[[[[1,0]]]]}"#;
        assert!(matches!(
            Element::from_json(text),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(Element::from_json("{"), Err(Error::Parse(_))));
    }
}
