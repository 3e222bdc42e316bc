//! Thread-confined object pools.
//!
//! Every thread owns at most one [`ThreadLocalPool`] per poolable type. Pools
//! live in a small per-thread array indexed by [`PoolFactory::unique_type_id`],
//! so finding the pool for a type is an array dereference rather than a map
//! lookup. A pool is created on first use and eagerly pre-filled with
//! `pool_size` managed items; after that no lock is taken on either the
//! acquire or the release path.
//!
//! When a pool runs dry, [`acquire`] falls back to constructing an unmanaged
//! item, so acquisition never fails for capacity reasons. Releasing an
//! unmanaged item is a no-op.
//!
//! ```
//! use std::any::Any;
//! use tlpool::pool::{acquire, PoolFactory, Poolable};
//!
//! #[derive(Default)]
//! struct Counter(u64);
//!
//! impl Poolable for Counter {
//!     fn set_data(&mut self, args: &[&dyn Any]) {
//!         if let Some(v) = args.first().and_then(|a| a.downcast_ref::<u64>()) {
//!             self.0 = *v;
//!         }
//!     }
//! }
//!
//! struct CounterFactory;
//!
//! impl PoolFactory for CounterFactory {
//!     type Item = Counter;
//!     fn unique_type_id(&self) -> usize { 3 }
//!     fn make_unmanaged(&self, _args: &[&dyn Any]) -> Counter { Counter::default() }
//! }
//!
//! let mut c = acquire(&CounterFactory, &[&7u64]).unwrap();
//! assert_eq!(c.0, 7);
//! assert!(c.is_managed());
//! c.release().unwrap();
//! ```

use std::any::{Any, TypeId};
use std::cell::{Ref, RefCell};
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use thiserror::Error;

/// Number of registry slots each thread reserves for pooled types.
pub const MAX_POOLED_TYPES: usize = 10;

/// Capacity used for new pools unless [`set_pool_size`] says otherwise.
pub const DEFAULT_POOL_SIZE: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PoolError {
    #[error("type id {id} is outside [0, {max})")]
    InvalidTypeId { id: usize, max: usize },
    #[error("type id {id} is already claimed by a different factory on this thread")]
    TypeIdCollision { id: usize },
    #[error("no pool exists on this thread for type id {id}")]
    PoolNotFound { id: usize },
    /// Release of a managed item that is not currently held by client code.
    #[error("Object not currently used")]
    NotInUse,
    #[error("item belongs to a pool owned by another thread")]
    WrongThread,
    #[error("pool size can no longer be changed: a pool has already been created")]
    PoolSizeLocked,
    #[error("pool size must be at least 1, got {0}")]
    InvalidPoolSize(usize),
}

/// A type whose instances can be recycled through a pool.
///
/// `set_data` re-initializes a recycled instance. The arguments are the ones
/// passed to [`acquire`]; their number and types are a contract between the
/// item type and its callers. [`acquire`] does not call `set_data` when
/// `args` is empty, so the payload is left untouched in that case.
pub trait Poolable: 'static {
    fn set_data(&mut self, args: &[&dyn Any]);
}

/// Builds items for a pooled type and names the registry slot its pools use.
pub trait PoolFactory: 'static {
    type Item: Poolable;

    /// Index of this type's pool in every thread's registry. Must be distinct
    /// per pooled type and lie in `[0, MAX_POOLED_TYPES)`.
    fn unique_type_id(&self) -> usize;

    /// Builds an item handed out when the pool is exhausted.
    fn make_unmanaged(&self, args: &[&dyn Any]) -> Self::Item;

    /// Builds an item that will be owned by `pool`. Called `pool_size` times
    /// while the pool is being filled.
    fn make_managed(&self, pool: PoolId, args: &[&dyn Any]) -> Self::Item {
        let _ = pool;
        self.make_unmanaged(args)
    }
}

/// Process-unique pool identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PoolId(u64);

impl fmt::Display for PoolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pool#{}", self.0)
    }
}

/// Process-unique identity of a thread that has touched the pool registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ThreadToken(u64);

/// Debug tag identifying a managed item: the pool that built it and its
/// position in the initial fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ItemTag {
    pub pool: PoolId,
    pub index: u32,
}

static NEXT_POOL_ID: AtomicU64 = AtomicU64::new(1);
static NEXT_THREAD_TOKEN: AtomicU64 = AtomicU64::new(1);

struct PoolConfig {
    size: usize,
    reset_allowed: bool,
}

static CONFIG: Mutex<PoolConfig> = Mutex::new(PoolConfig {
    size: DEFAULT_POOL_SIZE,
    reset_allowed: true,
});

fn config() -> std::sync::MutexGuard<'static, PoolConfig> {
    // The guarded data is two plain fields; a poisoned lock still holds a
    // consistent value.
    CONFIG.lock().unwrap_or_else(|e| e.into_inner())
}

/// Sets the capacity of pools created from now on.
///
/// Only allowed before any pool has been created anywhere in the process.
pub fn set_pool_size(n: usize) -> Result<(), PoolError> {
    if n < 1 {
        return Err(PoolError::InvalidPoolSize(n));
    }
    let mut cfg = config();
    if !cfg.reset_allowed {
        return Err(PoolError::PoolSizeLocked);
    }
    cfg.size = n;
    Ok(())
}

pub fn get_pool_size() -> usize {
    config().size
}

/// Whether [`set_pool_size`] would still be accepted.
pub fn pool_size_reset_allowed() -> bool {
    config().reset_allowed
}

/// Reads the configured size and closes the reset gate in one step.
fn claim_pool_size() -> usize {
    let mut cfg = config();
    cfg.reset_allowed = false;
    cfg.size
}

#[derive(Debug, Clone, Copy)]
struct Owner {
    pool: PoolId,
    thread: ThreadToken,
    type_id: u32,
    index: u32,
}

struct Entry<T> {
    payload: T,
    in_use: bool,
    owner: Option<Owner>,
}

/// Handle to a pooled (managed) or fallback (unmanaged) item.
///
/// A managed item goes back to its pool through [`PoolableItem::release`].
/// After release the handle is empty: dereferencing it panics and releasing
/// it again reports [`PoolError::NotInUse`]. Dropping a handle without
/// releasing it simply frees the item; it is not returned to the pool.
pub struct PoolableItem<T> {
    entry: Option<Box<Entry<T>>>,
    managed: bool,
}

impl<T: Poolable> PoolableItem<T> {
    fn unmanaged(payload: T) -> Self {
        PoolableItem {
            entry: Some(Box::new(Entry {
                payload,
                in_use: false,
                owner: None,
            })),
            managed: false,
        }
    }

    pub fn is_managed(&self) -> bool {
        self.managed
    }

    /// True while a managed item is held by client code.
    pub fn is_in_use(&self) -> bool {
        self.entry.as_ref().is_some_and(|e| e.in_use)
    }

    /// True once a managed item has been handed back to its pool.
    pub fn is_released(&self) -> bool {
        self.entry.is_none()
    }

    /// Identity of a managed item, stable across recycling. `None` for
    /// unmanaged items and for released handles.
    pub fn tag(&self) -> Option<ItemTag> {
        let owner = self.entry.as_ref()?.owner?;
        Some(ItemTag {
            pool: owner.pool,
            index: owner.index,
        })
    }

    pub fn get(&self) -> Option<&T> {
        self.entry.as_ref().map(|e| &e.payload)
    }

    pub fn get_mut(&mut self) -> Option<&mut T> {
        self.entry.as_mut().map(|e| &mut e.payload)
    }

    /// Returns a managed item to its pool. No-op for unmanaged items.
    ///
    /// Must be called on the thread that acquired the item. If the pool the
    /// item came from has since been deleted, the item is dropped instead.
    pub fn release(&mut self) -> Result<(), PoolError> {
        if !self.managed {
            return Ok(());
        }
        let owner = match &self.entry {
            None => return Err(PoolError::NotInUse),
            Some(e) if !e.in_use => return Err(PoolError::NotInUse),
            Some(e) => e.owner.expect("managed entry without owner"),
        };
        let returned = REGISTRY.try_with(|reg| {
            let reg = reg.borrow();
            if reg.token != owner.thread {
                return Err(PoolError::WrongThread);
            }
            let mut entry = self.entry.take().expect("checked above");
            entry.in_use = false;
            if let Some(slot) = reg.slot(owner.type_id as usize) {
                if let Some(pool) = slot.pool.downcast_ref::<RefCell<ThreadLocalPool<T>>>() {
                    let mut pool = pool.borrow_mut();
                    if pool.id == owner.pool {
                        pool.push(entry);
                    }
                }
            }
            Ok(())
        });
        // The registry is gone only while this thread is shutting down; the
        // pool went with it, so the item is just dropped.
        returned.unwrap_or_else(|_| {
            self.entry = None;
            Ok(())
        })
    }
}

impl<T> Deref for PoolableItem<T> {
    type Target = T;

    fn deref(&self) -> &T {
        &self.entry.as_ref().expect("item used after release").payload
    }
}

impl<T> DerefMut for PoolableItem<T> {
    fn deref_mut(&mut self) -> &mut T {
        &mut self.entry.as_mut().expect("item used after release").payload
    }
}

impl<T: fmt::Debug> fmt::Debug for PoolableItem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoolableItem")
            .field("managed", &self.managed)
            .field("payload", &self.entry.as_ref().map(|e| &e.payload))
            .finish()
    }
}

/// Fixed-capacity LIFO stack of available items, owned by one thread.
pub struct ThreadLocalPool<T> {
    id: PoolId,
    type_id: usize,
    owner_thread: ThreadToken,
    slots: Box<[Option<Box<Entry<T>>>]>,
    top_avail: isize,
}

impl<T: Poolable> ThreadLocalPool<T> {
    fn fill<F>(factory: &F, type_id: usize, thread: ThreadToken, args: &[&dyn Any]) -> Self
    where
        F: PoolFactory<Item = T>,
    {
        let capacity = claim_pool_size();
        let id = PoolId(NEXT_POOL_ID.fetch_add(1, Ordering::Relaxed));
        let slots: Box<[Option<Box<Entry<T>>>]> = (0..capacity)
            .map(|index| {
                Some(Box::new(Entry {
                    payload: factory.make_managed(id, args),
                    in_use: false,
                    owner: Some(Owner {
                        pool: id,
                        thread,
                        type_id: type_id as u32,
                        index: index as u32,
                    }),
                }))
            })
            .collect();
        ThreadLocalPool {
            id,
            type_id,
            owner_thread: thread,
            slots,
            top_avail: capacity as isize - 1,
        }
    }

    #[inline]
    fn pop(&mut self) -> Option<Box<Entry<T>>> {
        if self.top_avail < 0 {
            return None;
        }
        // take() clears the slot so the pool holds no reference to items it
        // has handed out.
        let mut entry = self.slots[self.top_avail as usize]
            .take()
            .expect("slot below top_avail is empty");
        self.top_avail -= 1;
        entry.in_use = true;
        Some(entry)
    }

    #[inline]
    fn push(&mut self, entry: Box<Entry<T>>) {
        self.top_avail += 1;
        let slot = &mut self.slots[self.top_avail as usize];
        debug_assert!(slot.is_none());
        *slot = Some(entry);
    }

    pub fn id(&self) -> PoolId {
        self.id
    }

    /// Registry slot this pool occupies.
    pub fn type_slot(&self) -> usize {
        self.type_id
    }

    pub fn owner_thread(&self) -> ThreadToken {
        self.owner_thread
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    /// Index of the topmost available item, -1 when empty.
    pub fn top_avail(&self) -> isize {
        self.top_avail
    }

    pub fn available(&self) -> usize {
        (self.top_avail + 1) as usize
    }

    /// Tags of the available items, bottom of the stack first.
    pub fn available_tags(&self) -> Vec<ItemTag> {
        self.slots[..self.available()]
            .iter()
            .map(|s| {
                let owner = s.as_ref().and_then(|e| e.owner).expect("available slot is empty");
                ItemTag {
                    pool: owner.pool,
                    index: owner.index,
                }
            })
            .collect()
    }

    /// Number of occupied slots above `top_avail`. Always zero.
    pub fn retained_above_top(&self) -> usize {
        self.slots[self.available()..].iter().filter(|s| s.is_some()).count()
    }
}

/// Shared, thread-confined reference to a registered pool.
pub struct PoolRef<T>(Rc<RefCell<ThreadLocalPool<T>>>);

impl<T> Clone for PoolRef<T> {
    fn clone(&self) -> Self {
        PoolRef(Rc::clone(&self.0))
    }
}

impl<T> fmt::Debug for PoolRef<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.0.borrow();
        f.debug_struct("PoolRef")
            .field("id", &p.id)
            .field("capacity", &p.slots.len())
            .field("top_avail", &p.top_avail)
            .finish()
    }
}

impl<T> PoolRef<T> {
    pub fn borrow(&self) -> Ref<'_, ThreadLocalPool<T>> {
        self.0.borrow()
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }
}

impl<T: Poolable> PoolRef<T> {
    pub fn id(&self) -> PoolId {
        self.0.borrow().id
    }

    pub fn capacity(&self) -> usize {
        self.0.borrow().capacity()
    }

    pub fn available(&self) -> usize {
        self.0.borrow().available()
    }
}

struct Slot {
    factory: TypeId,
    pool: Rc<dyn Any>,
}

struct ThreadRegistry {
    token: ThreadToken,
    pools: Option<Box<[Option<Slot>; MAX_POOLED_TYPES]>>,
}

impl ThreadRegistry {
    fn new() -> Self {
        ThreadRegistry {
            token: ThreadToken(NEXT_THREAD_TOKEN.fetch_add(1, Ordering::Relaxed)),
            pools: None,
        }
    }

    #[inline]
    fn slot(&self, id: usize) -> Option<&Slot> {
        self.pools.as_ref()?.get(id)?.as_ref()
    }
}

thread_local! {
    static REGISTRY: RefCell<ThreadRegistry> = RefCell::new(ThreadRegistry::new());
}

/// Token of the calling thread, as recorded in pools it owns.
pub fn current_thread_token() -> ThreadToken {
    REGISTRY.with(|reg| reg.borrow().token)
}

#[inline]
fn checked_type_id<F: PoolFactory>(factory: &F) -> Result<usize, PoolError> {
    let id = factory.unique_type_id();
    if id >= MAX_POOLED_TYPES {
        return Err(PoolError::InvalidTypeId {
            id,
            max: MAX_POOLED_TYPES,
        });
    }
    Ok(id)
}

#[inline]
fn typed_pool<F: PoolFactory>(slot: &Slot, id: usize) -> Result<&RefCell<ThreadLocalPool<F::Item>>, PoolError> {
    if slot.factory != TypeId::of::<F>() {
        return Err(PoolError::TypeIdCollision { id });
    }
    slot.pool
        .downcast_ref::<RefCell<ThreadLocalPool<F::Item>>>()
        .ok_or(PoolError::TypeIdCollision { id })
}

/// Runs `f` on the calling thread's pool for `factory`, creating the pool
/// first if needed.
fn with_pool<F, R>(
    factory: &F,
    args: &[&dyn Any],
    f: impl FnOnce(&mut ThreadLocalPool<F::Item>) -> R,
) -> Result<R, PoolError>
where
    F: PoolFactory,
{
    let id = checked_type_id(factory)?;
    REGISTRY.with(|cell| {
        {
            let reg = cell.borrow();
            if let Some(slot) = reg.slot(id) {
                let pool = typed_pool::<F>(slot, id)?;
                return Ok(f(&mut pool.borrow_mut()));
            }
        }
        let token = cell.borrow().token;
        // Filling calls into the factory, so no registry borrow is held here.
        let pool = Rc::new(RefCell::new(ThreadLocalPool::fill(factory, id, token, args)));
        let mut reg = cell.borrow_mut();
        let pools = reg.pools.get_or_insert_with(Box::default);
        pools[id] = Some(Slot {
            factory: TypeId::of::<F>(),
            pool: pool.clone(),
        });
        drop(reg);
        let r = f(&mut pool.borrow_mut());
        Ok(r)
    })
}

/// Returns an item for `factory`'s type with its payload set from `args`.
///
/// The item comes from the calling thread's pool when one is available and
/// is otherwise built unmanaged. The first call on a thread creates and
/// fills that thread's pool.
#[inline]
pub fn acquire<F: PoolFactory>(factory: &F, args: &[&dyn Any]) -> Result<PoolableItem<F::Item>, PoolError> {
    let mut item = match with_pool(factory, args, |pool| pool.pop())? {
        Some(entry) => PoolableItem {
            entry: Some(entry),
            managed: true,
        },
        None => PoolableItem::unmanaged(factory.make_unmanaged(args)),
    };
    if !args.is_empty() {
        item.set_data(args);
    }
    Ok(item)
}

/// The calling thread's pool for `factory`, created and filled on first use.
pub fn get_thread_local_pool<F: PoolFactory>(factory: &F, args: &[&dyn Any]) -> Result<PoolRef<F::Item>, PoolError> {
    let id = checked_type_id(factory)?;
    with_pool(factory, args, |_| ())?;
    existing_pool(factory, id)
}

/// The calling thread's pool for `factory`, without creating one.
///
/// Fails with [`PoolError::PoolNotFound`] if this thread has no pool for the
/// factory's type yet.
pub fn existing_thread_local_pool<F: PoolFactory>(factory: &F) -> Result<PoolRef<F::Item>, PoolError> {
    let id = checked_type_id(factory)?;
    existing_pool(factory, id)
}

fn existing_pool<F: PoolFactory>(_factory: &F, id: usize) -> Result<PoolRef<F::Item>, PoolError> {
    REGISTRY.with(|cell| {
        let reg = cell.borrow();
        let slot = reg.slot(id).ok_or(PoolError::PoolNotFound { id })?;
        typed_pool::<F>(slot, id)?;
        let pool = Rc::clone(&slot.pool)
            .downcast::<RefCell<ThreadLocalPool<F::Item>>>()
            .map_err(|_| PoolError::TypeIdCollision { id })?;
        Ok(PoolRef(pool))
    })
}

/// Drops the calling thread's pool for `factory`, if any. The next acquire
/// builds a fresh, full pool. Items still held from the old pool are freed
/// when released.
pub fn delete_thread_local_pool<F: PoolFactory>(factory: &F) -> Result<(), PoolError> {
    let id = checked_type_id(factory)?;
    let removed = REGISTRY.with(|cell| {
        let mut reg = cell.borrow_mut();
        let Some(pools) = reg.pools.as_mut() else {
            return Ok(None);
        };
        match &pools[id] {
            Some(slot) if slot.factory != TypeId::of::<F>() => Err(PoolError::TypeIdCollision { id }),
            _ => Ok(pools[id].take()),
        }
    })?;
    // Dropped outside the registry borrow: item destructors may re-enter.
    drop(removed);
    Ok(())
}
