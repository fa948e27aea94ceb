//! Wall-clock timing that degrades to zero where no clock exists (wasm32).

use std::time::Duration;

#[cfg(not(target_arch = "wasm32"))]
#[derive(Clone, Copy, Debug)]
pub struct Stopwatch(std::time::Instant);

#[cfg(target_arch = "wasm32")]
#[derive(Clone, Copy, Debug)]
pub struct Stopwatch;

impl Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    pub fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }

    #[cfg(target_arch = "wasm32")]
    pub fn start() -> Self {
        Stopwatch
    }

    #[cfg(not(target_arch = "wasm32"))]
    pub fn elapsed(&self) -> Duration {
        self.0.elapsed()
    }

    #[cfg(target_arch = "wasm32")]
    pub fn elapsed(&self) -> Duration {
        Duration::ZERO
    }
}
