use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex, MutexGuard};

struct Queue<R> {
    next: usize,
    taken: usize,
    ready: BTreeMap<usize, R>,
    stop: bool,
    worker_panicked: bool,
}

struct Shared<R> {
    q: Mutex<Queue<R>>,
    cv: Condvar,
}

impl<R> Shared<R> {
    fn lock(&self) -> MutexGuard<'_, Queue<R>> {
        self.q.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Marks the queue as broken if a worker unwinds, so the consumer does not
/// wait forever.
struct PanicGuard<'a, R>(&'a Shared<R>);

impl<R> Drop for PanicGuard<'_, R> {
    fn drop(&mut self) {
        if std::thread::panicking() {
            self.0.lock().worker_panicked = true;
            self.0.cv.notify_all();
        }
    }
}

/// Runs `produce(0..jobs)` on `depth` worker threads while `consume` handles
/// the results strictly in job order on the calling thread.
///
/// At most `depth` jobs are in flight or waiting beyond the one being
/// consumed, so workers prepare the next minibatches while the current one
/// trains. Output order, and therefore any result depending only on
/// `produce(j)`, does not depend on `depth`. The first consumer error stops
/// the workers and is returned.
pub fn run_pipelined<R, E, P, C>(jobs: usize, depth: usize, produce: P, mut consume: C) -> Result<(), E>
where
    R: Send,
    P: Fn(usize) -> R + Sync,
    C: FnMut(usize, R) -> Result<(), E>,
{
    let depth = depth.max(1);
    let shared = Shared {
        q: Mutex::new(Queue {
            next: 0,
            taken: 0,
            ready: BTreeMap::new(),
            stop: false,
            worker_panicked: false,
        }),
        cv: Condvar::new(),
    };
    std::thread::scope(|s| {
        for _ in 0..depth.min(jobs) {
            s.spawn(|| {
                let _guard = PanicGuard(&shared);
                loop {
                    let job = {
                        let mut q = shared.lock();
                        while !q.stop && q.next < jobs && q.next >= q.taken + depth {
                            q = shared.cv.wait(q).unwrap_or_else(|e| e.into_inner());
                        }
                        if q.stop || q.next >= jobs {
                            return;
                        }
                        q.next += 1;
                        q.next - 1
                    };
                    let r = produce(job);
                    shared.lock().ready.insert(job, r);
                    shared.cv.notify_all();
                }
            });
        }

        let result = (|| {
            for j in 0..jobs {
                let item = {
                    let mut q = shared.lock();
                    loop {
                        if let Some(r) = q.ready.remove(&j) {
                            break r;
                        }
                        if q.worker_panicked {
                            q.stop = true;
                            drop(q);
                            shared.cv.notify_all();
                            panic!("preprocessing worker panicked");
                        }
                        q = shared.cv.wait(q).unwrap_or_else(|e| e.into_inner());
                    }
                };
                {
                    shared.lock().taken = j + 1;
                    shared.cv.notify_all();
                }
                consume(j, item)?;
            }
            Ok(())
        })();
        shared.lock().stop = true;
        shared.cv.notify_all();
        result
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn consumes_in_order_for_any_depth() {
        for depth in [1, 2, 4, 9] {
            let mut seen = Vec::new();
            run_pipelined::<_, (), _, _>(
                20,
                depth,
                |j| {
                    // uneven work so workers finish out of order
                    std::thread::sleep(std::time::Duration::from_micros(((j * 7) % 5) as u64 * 200));
                    j * j
                },
                |j, r| {
                    assert_eq!(r, j * j);
                    seen.push(j);
                    Ok(())
                },
            )
            .unwrap();
            assert_eq!(seen, (0..20).collect::<Vec<_>>());
        }
    }

    #[test]
    fn look_ahead_is_bounded() {
        let depth = 3;
        let started = AtomicUsize::new(0);
        run_pipelined::<_, (), _, _>(
            30,
            depth,
            |_| {
                started.fetch_add(1, Ordering::SeqCst);
            },
            |j, _| {
                std::thread::sleep(std::time::Duration::from_millis(1));
                // jobs started ≤ consumed (j + 1) + depth
                assert!(started.load(Ordering::SeqCst) <= j + 1 + depth);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(started.load(Ordering::SeqCst), 30);
    }

    #[test]
    fn consumer_error_stops_early() {
        let produced = AtomicUsize::new(0);
        let r = run_pipelined(
            1000,
            2,
            |_| {
                produced.fetch_add(1, Ordering::SeqCst);
            },
            |j, _| if j == 3 { Err("boom") } else { Ok(()) },
        );
        assert_eq!(r, Err("boom"));
        assert!(produced.load(Ordering::SeqCst) <= 4 + 2);
    }

    #[test]
    fn zero_jobs_is_fine() {
        run_pipelined::<(), (), _, _>(0, 4, |_| (), |_, _| Ok(())).unwrap();
    }
}
