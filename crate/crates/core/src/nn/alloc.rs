//! Training allocates and frees activation buffers of tens of megabytes on
//! every step. With default settings glibc serves these with fresh mmaps and
//! returns them on free, so each step pays for page faults on every buffer.
//! Raising the mmap and trim thresholds keeps that memory in the heap for
//! reuse. This is a process-wide setting applied once on first training use.

use std::sync::Once;

static TUNE: Once = Once::new();

#[cfg(all(target_os = "linux", target_env = "gnu"))]
pub(crate) fn keep_freed_memory() {
    const M_TRIM_THRESHOLD: i32 = -1;
    const M_MMAP_THRESHOLD: i32 = -3;
    extern "C" {
        fn mallopt(param: i32, value: i32) -> i32;
    }
    TUNE.call_once(|| {
        // SAFETY: mallopt only adjusts allocator tunables.
        unsafe {
            mallopt(M_MMAP_THRESHOLD, 1 << 30);
            mallopt(M_TRIM_THRESHOLD, 1 << 30);
        }
    });
}

#[cfg(not(all(target_os = "linux", target_env = "gnu")))]
pub(crate) fn keep_freed_memory() {
    TUNE.call_once(|| {});
}
