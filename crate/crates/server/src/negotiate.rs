use staticembed_core::WireFormat;

/// Picks the response format: the request body override wins, then the
/// most preferred recognized `Accept` media type, then `default`.
pub fn negotiate_format(
    accept: Option<&str>,
    request_override: Option<WireFormat>,
    default: WireFormat,
) -> WireFormat {
    if let Some(format) = request_override {
        return format;
    }
    accept.and_then(preferred_accept).unwrap_or(default)
}

fn preferred_accept(header: &str) -> Option<WireFormat> {
    let mut best: Option<(f32, WireFormat)> = None;
    for item in header.split(',') {
        let mut parts = item.split(';');
        let media = parts.next().unwrap_or("").trim();
        let Some(format) = WireFormat::from_content_type(media) else { continue };
        let q = parts
            .filter_map(|p| p.trim().strip_prefix("q="))
            .find_map(|q| q.trim().parse::<f32>().ok())
            .unwrap_or(1.0);
        if q > 0.0 && best.is_none_or(|(bq, _)| q > bq) {
            best = Some((q, format));
        }
    }
    best.map(|(_, f)| f)
}
