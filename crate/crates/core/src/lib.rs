//! Core of the storybot toolkit: a block language for social robot
//! behaviors, the timed action IR it lowers to, a deterministic simulator,
//! and the LLM scaffolding (story co-creation, goal and hint generation)
//! that is grounded in what the robot can actually do.
//!
//! ```
//! use storybot_core::catalog::builtin_catalog;
//! use storybot_core::program::{lower, validate, Block, BlockProgram};
//! use storybot_core::simulator;
//!
//! let (catalog, _) = builtin_catalog();
//! let program = BlockProgram::new(vec![
//!     Block::new("set_face").arg("expression", "happy"),
//!     Block::new("speak").arg("text", "Hello how are you today"),
//! ]);
//! assert!(validate(&program, &catalog).is_valid());
//!
//! let timeline = lower(&program, &catalog, 2.5).unwrap();
//! assert_eq!(timeline.total_duration, 2.1);
//! let trace = simulator::run(&timeline).unwrap();
//! assert_eq!(trace.final_state.face, "happy");
//! ```

pub mod catalog;
pub mod gateway;
pub mod goals;
pub mod narrative;
pub mod program;
pub mod prompts;
pub mod simulator;

use catalog::{builtin_catalog, render_manifest_text, CapabilityManifest, Catalog};

/// What every prompt is grounded in: the block catalog, the manifest
/// derived from it, and the manifest rendered as text.
#[derive(Debug, Clone, PartialEq)]
pub struct Grounding {
    pub catalog: Catalog,
    pub manifest: CapabilityManifest,
    pub capability_text: String,
}

impl Grounding {
    pub fn new(catalog: Catalog, manifest: CapabilityManifest) -> Self {
        let capability_text = render_manifest_text(&catalog, &manifest);
        Self {
            catalog,
            manifest,
            capability_text,
        }
    }

    pub fn builtin() -> Self {
        let (catalog, manifest) = builtin_catalog();
        Self::new(catalog, manifest)
    }
}
