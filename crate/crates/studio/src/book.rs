#[doc = include_str!("../../../book/src/blocks.md")]
pub struct Blocks;

#[doc = include_str!("../../../book/src/timeline.md")]
pub struct Timeline;

#[doc = include_str!("../../../book/src/scaffolding.md")]
pub struct Scaffolding;

#[doc = include_str!("../../../book/src/robot.md")]
pub struct Robot;

#[doc = include_str!("../../../book/src/service.md")]
pub struct Service;
