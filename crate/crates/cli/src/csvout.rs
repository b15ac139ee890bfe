use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

/// A CSV file with a fixed header, or nothing when no path was given.
pub struct CsvSink(Option<csv::Writer<BufWriter<File>>>);

impl CsvSink {
    pub fn open(path: Option<&Path>, header: &[&str]) -> Result<Self, csv::Error> {
        let Some(p) = path else { return Ok(Self(None)) };
        let mut w = csv::WriterBuilder::new().delimiter(b',').from_writer(BufWriter::new(File::create(p)?));
        w.write_record(header)?;
        Ok(Self(Some(w)))
    }

    pub fn row(&mut self, fields: &[&str]) -> Result<(), csv::Error> {
        match &mut self.0 {
            Some(w) => w.write_record(fields),
            None => Ok(()),
        }
    }

    pub fn finish(self) -> Result<(), csv::Error> {
        if let Some(mut w) = self.0 {
            w.flush()?;
        }
        Ok(())
    }
}
