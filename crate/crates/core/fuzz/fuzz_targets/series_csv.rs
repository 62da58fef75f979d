//! CSV series reader must reject arbitrary bytes without panicking, and
//! anything it accepts must survive a write/read round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsevar::TimeSeries;

fuzz_target!(|data: &[u8]| {
    if let Ok(series) = TimeSeries::from_csv_reader(data) {
        let mut out = Vec::new();
        series.to_csv_writer(&mut out).unwrap();
        let back = TimeSeries::from_csv_reader(out.as_slice()).unwrap();
        assert_eq!(back.len(), series.len());
        assert_eq!(back.dim(), series.dim());
    }
});
