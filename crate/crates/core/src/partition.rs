//! Splitting a fixed amount of work across worker threads.

/// One worker's share: `count` consecutive indices starting at `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Share {
    pub worker: usize,
    pub offset: u64,
    pub count: u64,
}

/// Splits `total` items over `workers` threads. The first `workers - 1`
/// shares get `total / workers` items each and the last gets the rest.
///
/// Returns `None` unless `total >= workers >= 1`.
pub fn partition(total: u64, workers: usize) -> Option<Vec<Share>> {
    if workers == 0 || total < workers as u64 {
        return None;
    }
    let per = total / workers as u64;
    let mut offset = 0;
    let mut shares = Vec::with_capacity(workers);
    for worker in 0..workers - 1 {
        shares.push(Share {
            worker,
            offset,
            count: per,
        });
        offset += per;
    }
    shares.push(Share {
        worker: workers - 1,
        offset,
        count: total - offset,
    });
    Some(shares)
}
