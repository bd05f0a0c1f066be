//! Name-keyed factories for the interchangeable replay samplers and environments.

use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::ChaCha8Rng;

use crate::envs::{Environment, Pendulum, PointReacher};
use crate::ero::{EroConfig, EroSampler};
use crate::replay::{PerConfig, PerProportional, PerRank, ReplayError, ReplaySampler, UniformSampler};

/// Everything a sampler factory may draw on.
pub struct SamplerContext<'a> {
    pub capacity: usize,
    pub per: &'a PerConfig,
    pub ero: &'a EroConfig,
    /// Drives batch sampling.
    pub sample_rng: ChaCha8Rng,
    /// Drives the replay policy's masks and mini-batches.
    pub policy_rng: ChaCha8Rng,
    /// Seeds the replay policy network.
    pub policy_init_seed: u64,
}

pub type SamplerFactory = Box<dyn Fn(SamplerContext<'_>) -> Result<Box<dyn ReplaySampler>, ReplayError> + Send + Sync>;
pub type EnvFactory = Box<dyn Fn() -> Box<dyn Environment> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{name}` (known: {known})")]
pub struct UnknownName {
    pub kind: &'static str,
    pub name: String,
    pub known: String,
}

struct Registry<F> {
    kind: &'static str,
    entries: BTreeMap<String, F>,
}

impl<F> Registry<F> {
    fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    fn get(&self, name: &str) -> Result<&F, UnknownName> {
        self.entries.get(name).ok_or_else(|| UnknownName {
            kind: self.kind,
            name: name.to_string(),
            known: self.entries.keys().cloned().collect::<Vec<_>>().join(", "),
        })
    }

    fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

pub struct SamplerRegistry(Registry<SamplerFactory>);

impl SamplerRegistry {
    pub fn empty() -> Self {
        Self(Registry::new("sampler"))
    }

    /// `uniform`, `per_prop`, `per_rank` and `ero`.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("uniform", |ctx| Ok(Box::new(UniformSampler::new(ctx.sample_rng))));
        reg.register("per_prop", |ctx| {
            Ok(Box::new(PerProportional::new(ctx.capacity, ctx.per.clone(), ctx.sample_rng)?))
        });
        reg.register("per_rank", |ctx| Ok(Box::new(PerRank::new(ctx.per.clone(), ctx.sample_rng)?)));
        reg.register("ero", |ctx| {
            Ok(Box::new(EroSampler::new(
                ctx.ero.clone(),
                ctx.capacity,
                ctx.policy_init_seed,
                ctx.sample_rng,
                ctx.policy_rng,
            )?))
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(SamplerContext<'_>) -> Result<Box<dyn ReplaySampler>, ReplayError> + Send + Sync + 'static,
    {
        self.0.entries.insert(name.to_string(), Box::new(factory));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.0.names()
    }

    pub fn create(&self, name: &str, ctx: SamplerContext<'_>) -> Result<Box<dyn ReplaySampler>, RegistryError> {
        Ok((self.0.get(name)?)(ctx)?)
    }
}

pub struct EnvRegistry(Registry<EnvFactory>);

impl EnvRegistry {
    pub fn empty() -> Self {
        Self(Registry::new("environment"))
    }

    /// `pendulum` and `point_reacher`.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("pendulum", || Box::new(Pendulum::new()));
        reg.register("point_reacher", || Box::new(PointReacher::new()));
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn() -> Box<dyn Environment> + Send + Sync + 'static,
    {
        self.0.entries.insert(name.to_string(), Box::new(factory));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.0.names()
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn Environment>, UnknownName> {
        Ok((self.0.get(name)?)())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error(transparent)]
    Unknown(#[from] UnknownName),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

impl fmt::Debug for SamplerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SamplerRegistry").field(&self.names()).finish()
    }
}

impl fmt::Debug for EnvRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("EnvRegistry").field(&self.names()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn ctx<'a>(per: &'a PerConfig, ero: &'a EroConfig) -> SamplerContext<'a> {
        SamplerContext {
            capacity: 16,
            per,
            ero,
            sample_rng: ChaCha8Rng::seed_from_u64(0),
            policy_rng: ChaCha8Rng::seed_from_u64(1),
            policy_init_seed: 2,
        }
    }

    #[test]
    fn builtin_samplers_report_their_names() {
        let reg = SamplerRegistry::builtin();
        let (per, ero) = (PerConfig::default(), EroConfig::default());
        assert_eq!(reg.names(), vec!["ero", "per_prop", "per_rank", "uniform"]);
        for name in reg.names() {
            assert_eq!(reg.create(name, ctx(&per, &ero)).unwrap().name(), name);
        }
    }

    #[test]
    fn builtin_envs_report_their_names() {
        let reg = EnvRegistry::builtin();
        for name in reg.names() {
            assert_eq!(reg.create(name).unwrap().name(), name);
        }
    }

    #[test]
    fn unknown_names_list_alternatives() {
        let err = EnvRegistry::builtin().create("cartpole").err().unwrap();
        assert_eq!(err.to_string(), "unknown environment `cartpole` (known: pendulum, point_reacher)");
        let (per, ero) = (PerConfig::default(), EroConfig::default());
        assert!(matches!(
            SamplerRegistry::builtin().create("her", ctx(&per, &ero)),
            Err(RegistryError::Unknown(_))
        ));
    }

    #[test]
    fn custom_registration() {
        let mut reg = SamplerRegistry::empty();
        reg.register("plain", |ctx| Ok(Box::new(UniformSampler::new(ctx.sample_rng))));
        assert!(reg.contains("plain"));
        assert!(!reg.contains("uniform"));
    }

    #[test]
    fn invalid_config_surfaces_from_factory() {
        let per = PerConfig {
            alpha: -1.0,
            ..PerConfig::default()
        };
        let ero = EroConfig::default();
        assert!(matches!(
            SamplerRegistry::builtin().create("per_rank", ctx(&per, &ero)),
            Err(RegistryError::Replay(ReplayError::Config(_)))
        ));
    }
}
