use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{CategoryId, IngestError, PlaceId};
use crate::geo::GeoPoint;

const PLACES_HEADER: [&str; 4] = ["external_id", "lat", "lon", "category"];

#[derive(Debug, Clone, PartialEq)]
pub struct Place {
    pub id: PlaceId,
    pub external_id: String,
    pub location: GeoPoint,
    pub category: CategoryId,
}

/// Category labels in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CategoryTable {
    labels: Vec<String>,
    lookup: HashMap<String, CategoryId>,
}

impl CategoryTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_labels<I, S>(labels: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = CategoryTable::new();
        for l in labels {
            table.intern(&l.into())?;
        }
        Ok(table)
    }

    pub fn intern(&mut self, label: &str) -> Result<CategoryId, IngestError> {
        if let Some(&id) = self.lookup.get(label) {
            return Ok(id);
        }
        if self.labels.len() > usize::from(u16::MAX) {
            return Err(IngestError::TooManyCategories { max: usize::from(u16::MAX) + 1 });
        }
        let id = CategoryId(self.labels.len() as u16);
        self.labels.push(label.to_owned());
        self.lookup.insert(label.to_owned(), id);
        Ok(id)
    }

    pub fn get(&self, label: &str) -> Option<CategoryId> {
        self.lookup.get(label).copied()
    }

    pub fn label(&self, id: CategoryId) -> &str {
        &self.labels[id.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn load_places(path: impl AsRef<Path>) -> Result<(Vec<Place>, CategoryTable), IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_places(file)
}

/// Reads a places CSV (`external_id,lat,lon,category`) and assigns dense ids
/// in file order.
pub fn read_places<R: Read>(reader: R) -> Result<(Vec<Place>, CategoryTable), IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &PLACES_HEADER)?;

    let mut places = Vec::new();
    let mut table = CategoryTable::new();
    let mut seen: HashMap<String, ()> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(IngestError::Malformed { line, message: format!("expected 4 fields, found {}", rec.len()) });
        }
        let external_id = rec[0].to_owned();
        if external_id.is_empty() {
            return Err(IngestError::Malformed { line, message: "empty external_id".into() });
        }
        let lat = parse_f64(&rec[1], "lat", line)?;
        let lon = parse_f64(&rec[2], "lon", line)?;
        let location = GeoPoint::new(lat, lon).map_err(|source| IngestError::Coordinate { line, source })?;
        if seen.insert(external_id.clone(), ()).is_some() {
            return Err(IngestError::DuplicateExternalId { line, external_id });
        }
        let category = table.intern(&rec[3])?;
        places.push(Place { id: PlaceId(places.len() as u32), external_id, location, category });
    }
    Ok((places, table))
}

pub fn write_places<W: Write>(places: &[Place], table: &CategoryTable, writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PLACES_HEADER)?;
    for p in places {
        w.write_record([
            p.external_id.as_str(),
            &p.location.lat().to_string(),
            &p.location.lon().to_string(),
            table.label(p.category),
        ])?;
    }
    w.flush().map_err(|e| IngestError::io("<places writer>", e))?;
    Ok(())
}

pub(super) fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    if found.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(IngestError::Header { expected: expected.join(","), found: found.iter().collect::<Vec<_>>().join(",") })
    }
}

fn parse_f64(s: &str, field: &str, line: u64) -> Result<f64, IngestError> {
    s.parse::<f64>()
        .map_err(|_| IngestError::Malformed { line, message: format!("{field}: cannot parse `{s}` as a number") })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows_get_dense_ids() {
        let csv = "external_id,lat,lon,category\na,40.7,-73.9,food\nb,40.71,-73.91,park\nc,40.72,-73.92,food\n";
        let (places, table) = read_places(csv.as_bytes()).unwrap();
        assert_eq!(places.iter().map(|p| p.id.0).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(table.len(), 2);
        assert_eq!(places[2].category, places[0].category);
        assert_eq!(table.label(places[1].category), "park");
    }

    #[test]
    fn out_of_range_latitude_names_line() {
        let csv = "external_id,lat,lon,category\na,40.7,-73.9,food\nb,91,-73.91,park\n";
        let err = read_places(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::Coordinate { line: 3, .. }), "{err:?}");
        assert!(err.to_string().starts_with("line 3"));
    }

    #[test]
    fn duplicate_external_id_rejected() {
        let csv = "external_id,lat,lon,category\na,40.7,-73.9,food\na,40.71,-73.91,park\n";
        assert!(matches!(read_places(csv.as_bytes()).unwrap_err(), IngestError::DuplicateExternalId { line: 3, .. }));
    }

    #[test]
    fn wrong_header_rejected() {
        let csv = "id,lat,lon,category\na,40.7,-73.9,food\n";
        assert!(matches!(read_places(csv.as_bytes()).unwrap_err(), IngestError::Header { .. }));
    }

    #[test]
    fn unparsable_number() {
        let csv = "external_id,lat,lon,category\na,north,-73.9,food\n";
        assert!(matches!(read_places(csv.as_bytes()).unwrap_err(), IngestError::Malformed { line: 2, .. }));
    }
}
