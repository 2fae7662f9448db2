// SPDX-License-Identifier: Apache-2.0

//! The commit exclusion region.
//!
//! Every acquisition is counted, and the holding thread is flagged so that
//! work which must stay outside the region (page compression) can detect a
//! violation.

use std::cell::Cell;
use std::ops::{Deref, DerefMut};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, MutexGuard};

thread_local! {
    static IN_COMMIT_REGION: Cell<bool> = const { Cell::new(false) };
}

pub(crate) fn in_commit_region() -> bool {
    IN_COMMIT_REGION.with(Cell::get)
}

#[derive(Debug, Default)]
pub(crate) struct CommitLock<T> {
    inner: Mutex<T>,
    acquisitions: AtomicU64,
}

impl<T> CommitLock<T> {
    pub(crate) fn new(value: T) -> Self {
        Self { inner: Mutex::new(value), acquisitions: AtomicU64::new(0) }
    }

    pub(crate) fn lock(&self) -> CommitGuard<'_, T> {
        // a panic while committing leaves the writer unusable anyway; keep the data
        let guard = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        self.acquisitions.fetch_add(1, Ordering::Relaxed);
        IN_COMMIT_REGION.with(|f| f.set(true));
        CommitGuard { guard }
    }

    pub(crate) fn acquisitions(&self) -> u64 {
        self.acquisitions.load(Ordering::Relaxed)
    }
}

pub(crate) struct CommitGuard<'a, T> {
    guard: MutexGuard<'a, T>,
}

impl<T> Drop for CommitGuard<'_, T> {
    fn drop(&mut self) {
        IN_COMMIT_REGION.with(|f| f.set(false));
    }
}

impl<T> Deref for CommitGuard<'_, T> {
    type Target = T;
    fn deref(&self) -> &T {
        &self.guard
    }
}

impl<T> DerefMut for CommitGuard<'_, T> {
    fn deref_mut(&mut self) -> &mut T {
        &mut self.guard
    }
}
