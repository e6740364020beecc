//! Service configuration. Sources, highest precedence first: command-line
//! flags, `STATICEMBED_*` environment variables, a `key=value` config file,
//! built-in defaults.

use std::time::Duration;

use staticembed_core::{WireFormat, ZeroVectorPolicy};
use thiserror::Error;

pub const ENV_PREFIX: &str = "STATICEMBED_";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{source_name}: unknown key {key:?}")]
    UnknownKey { source_name: String, key: String },
    #[error("{source_name}: bad value {value:?} for {key}: {reason}")]
    BadValue { source_name: String, key: String, value: String, reason: String },
    #[error("{source_name}: line {line} is not key=value")]
    Syntax { source_name: String, line: usize },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind_address: String,
    pub max_batch_size: usize,
    pub max_tokens_per_text: usize,
    pub max_concurrent_requests: usize,
    pub worker_threads: usize,
    pub default_format: WireFormat,
    pub zero_vector_policy: ZeroVectorPolicy,
    /// Artificial pause inside the embed handler, after admission. For load
    /// shedding diagnostics only.
    pub handler_delay: Option<Duration>,
    pub max_body_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind_address: "127.0.0.1:8080".into(),
            max_batch_size: 256,
            max_tokens_per_text: 512,
            max_concurrent_requests: 10_000,
            worker_threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            default_format: WireFormat::Json,
            zero_vector_policy: ZeroVectorPolicy::ReturnZero,
            handler_delay: None,
            max_body_bytes: 32 << 20,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("max_batch_size", self.max_batch_size),
            ("max_tokens_per_text", self.max_tokens_per_text),
            ("max_concurrent_requests", self.max_concurrent_requests),
            ("worker_threads", self.worker_threads),
            ("max_body_bytes", self.max_body_bytes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ConfigError::Invalid(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Layers `flags` over `env` over `file` over the defaults.
    pub fn resolve(
        flags: ConfigOverrides,
        env: ConfigOverrides,
        file: ConfigOverrides,
    ) -> Result<Self, ConfigError> {
        let config = flags.or(env).or(file).apply(Self::default());
        config.validate()?;
        Ok(config)
    }
}

macro_rules! overrides {
    ($($field:ident: $ty:ty => $target:ident),* $(,)?) => {
        /// Optional value per configuration key; `None` defers to the next source.
        #[derive(Debug, Clone, Default, PartialEq)]
        pub struct ConfigOverrides {
            $(pub $field: Option<$ty>,)*
        }

        impl ConfigOverrides {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            /// Field-wise `self` if set, else `lower`.
            pub fn or(self, lower: Self) -> Self {
                Self { $($field: self.$field.or(lower.$field),)* }
            }

            fn apply(self, mut config: ServiceConfig) -> ServiceConfig {
                $(if let Some(v) = self.$field { config.$target = v.into_config(); })*
                config
            }

            fn set(&mut self, key: &str, value: &str) -> Option<Result<(), String>> {
                match key {
                    $(stringify!($field) => Some(parse_value::<$ty>(value).map(|v| self.$field = Some(v))),)*
                    _ => None,
                }
            }
        }
    };
}

overrides! {
    bind: String => bind_address,
    max_batch_size: usize => max_batch_size,
    max_tokens_per_text: usize => max_tokens_per_text,
    max_concurrent_requests: usize => max_concurrent_requests,
    worker_threads: usize => worker_threads,
    default_format: WireFormat => default_format,
    zero_vector_policy: ZeroVectorPolicy => zero_vector_policy,
    handler_delay_ms: u64 => handler_delay,
    max_body_bytes: usize => max_body_bytes,
}

trait IntoConfig<T> {
    fn into_config(self) -> T;
}

impl<T> IntoConfig<T> for T {
    fn into_config(self) -> T {
        self
    }
}

impl IntoConfig<Option<Duration>> for u64 {
    fn into_config(self) -> Option<Duration> {
        (self > 0).then(|| Duration::from_millis(self))
    }
}

fn parse_value<T: std::str::FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| e.to_string())
}

impl ConfigOverrides {
    fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (String, &'a str)>,
        source_name: &str,
        strict: bool,
    ) -> Result<Self, ConfigError> {
        let mut out = Self::default();
        for (key, value) in pairs {
            match out.set(&key, value) {
                Some(Ok(())) => {}
                Some(Err(reason)) => {
                    return Err(ConfigError::BadValue {
                        source_name: source_name.into(),
                        key,
                        value: value.into(),
                        reason,
                    })
                }
                None if strict => {
                    return Err(ConfigError::UnknownKey { source_name: source_name.into(), key })
                }
                None => {}
            }
        }
        Ok(out)
    }

    /// Reads `STATICEMBED_<KEY>` variables; unrelated names are ignored.
    pub fn from_env<I>(vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let vars: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v)))
            .collect();
        Self::from_pairs(vars.iter().map(|(k, v)| (k.clone(), v.as_str())), "environment", false)
    }

    /// Parses `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn from_file_contents(contents: &str, source_name: &str) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        for (i, line) in contents.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { source_name: source_name.into(), line: i + 1 })?;
            pairs.push((key.trim().to_ascii_lowercase().replace('-', "_"), value.trim()));
        }
        Self::from_pairs(pairs, source_name, true)
    }
}
