//! Process-level tuning shared by the computational entry points.

use std::sync::Once;

static ALLOCATOR_TUNED: Once = Once::new();

/// Keep multi-hundred-kilobyte buffers on the heap instead of letting the
/// allocator route them through mmap. The engine allocates and frees
/// same-sized activation and scratch buffers every step; at the default
/// mmap threshold each round trip costs an unmap plus page-fault zeroing,
/// which dominates the small-tensor math. Called from the training, solve,
/// and CLI entry points; idempotent.
pub fn keep_step_buffers_heap_resident() {
    ALLOCATOR_TUNED.call_once(|| unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 1 << 30);
    });
}
