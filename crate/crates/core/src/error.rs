use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point at latitude {lat_deg:.4} deg lies outside the service band (|lat| <= {lat_max_deg} deg)")]
    OutOfBand { lat_deg: f64, lat_max_deg: f64 },

    #[error("cell {cell_id}: only {available} usable SVs in view, {required} required")]
    InsufficientVisibility {
        cell_id: u32,
        available: usize,
        required: usize,
    },

    #[error("SV {sv_id} is below the horizon of cell {cell_id}")]
    BelowHorizon { sv_id: u32, cell_id: u32 },

    #[error("field `{field}` value {value} does not fit in {bits} bits")]
    Encoding {
        field: &'static str,
        value: u64,
        bits: u32,
    },

    #[error("malformed encoded data: {0}")]
    Decoding(String),

    #[error("resource saturated: {0}")]
    Saturation(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
