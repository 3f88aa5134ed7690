use core::ops::Sub;
use core::sync::atomic::{AtomicU64, Ordering};

macro_rules! counters {
    ($($field:ident),* $(,)?) => {
        /// Snapshot of operation counts.
        #[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
        pub struct OpCounts {
            $(pub $field: u64,)*
        }

        impl Sub for OpCounts {
            type Output = OpCounts;
            fn sub(self, rhs: OpCounts) -> OpCounts {
                OpCounts { $($field: self.$field - rhs.$field,)* }
            }
        }

        /// Lock-free per-operation counters shared by all callers of a backend.
        #[derive(Debug, Default)]
        pub struct Meter {
            $($field: AtomicU64,)*
        }

        impl Meter {
            $(
                pub(crate) fn $field(&self) {
                    self.$field.fetch_add(1, Ordering::Relaxed);
                }
            )*

            pub fn snapshot(&self) -> OpCounts {
                OpCounts { $($field: self.$field.load(Ordering::Relaxed),)* }
            }
        }
    };
}

counters!(encrypt, decrypt, encode, add, add_plain, mul_plain, mul_const, mul, rotate, level_down, refresh, compare);
