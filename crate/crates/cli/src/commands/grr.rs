use laserprof_core::{grr_study, GrrMeasurementSet, GrrRecord, Unit};

use crate::args::{GrrArgs, UnitArg};
use crate::config::{self, GrrConfig};
use crate::io;
use crate::Status;

pub fn run(args: &GrrArgs) -> anyhow::Result<Status> {
    let cfg: GrrConfig = config::load(args.config.as_deref())?;
    let unit = match args.unit {
        Some(UnitArg::Um) => Unit::Um,
        Some(UnitArg::Mm) => Unit::Mm,
        Some(UnitArg::Px) => Unit::Px,
        None => cfg.unit.unwrap_or_default(),
    };
    config::require_exists(&args.input, "measurement table")?;
    let records: Vec<GrrRecord> = io::read_csv(&args.input)?;
    let data = GrrMeasurementSet::from_records(&records, unit)?;
    let result = grr_study(&data)?;
    io::write_json(io::open_output(args.out.as_deref())?, &result)?;
    Ok(Status::Ok)
}
