//! C ABI for the scene model, similarity metric and dialog engine.
//!
//! Every fallible call returns a [`CodrawStatus`]; on failure
//! [`codraw_last_error`] describes the most recent error on the calling thread.
//! Objects are opaque handles released with their matching `_free` function.
//! Strings returned to the caller are released with [`codraw_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use codraw::agents::edit_distance::edit_distance;
use codraw::engine::{GameConfig, GameState, Role};
use codraw::metric::{iou, similarity};
use codraw::scene::{DrawerAction, Scene};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodrawStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    /// A game rule rejected the call (wrong turn, over-length message, second peek, ...).
    Rejected = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodrawRole {
    Teller = 0,
    Drawer = 1,
}

impl From<CodrawRole> for Role {
    fn from(r: CodrawRole) -> Role {
        match r {
            CodrawRole::Teller => Role::Teller,
            CodrawRole::Drawer => Role::Drawer,
        }
    }
}

/// Opaque scene handle.
pub struct CodrawScene(Scene);

/// Opaque game handle.
pub struct CodrawGame(GameState);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(CodrawStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(CodrawStatus::NullPointer, format!("{what} is null"))
    }
}

/// Runs `f`, translating failures and panics into a status and the last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CodrawStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CodrawStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CodrawStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(CodrawStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("out"));
    }
    out.write(value);
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no nul bytes").into_raw()
}

fn json<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(s).map_err(|e| Failure(CodrawStatus::InvalidJson, format!("{what}: {e}")))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn codraw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn codraw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn codraw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a scene from its JSON list of pieces.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn codraw_scene_from_json(json_text: *const c_char, out: *mut *mut CodrawScene) -> CodrawStatus {
    guard(|| {
        let scene: Scene = json(text(json_text, "json")?, "scene")?;
        write(out, Box::into_raw(Box::new(CodrawScene(scene))))
    })
}

/// Serializes a scene; free the result with [`codraw_string_free`].
///
/// # Safety
/// `scene` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn codraw_scene_to_json(scene: *const CodrawScene, out: *mut *mut c_char) -> CodrawStatus {
    guard(|| write(out, to_c_string(borrow(scene, "scene")?.0.to_json())))
}

/// Number of pieces, or 0 for a null handle.
///
/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn codraw_scene_len(scene: *const CodrawScene) -> usize {
    scene.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `scene` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn codraw_scene_free(scene: *mut CodrawScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Scene similarity with the default weights.
///
/// # Safety
/// Both scenes must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn codraw_similarity(truth: *const CodrawScene, pred: *const CodrawScene, out: *mut f64) -> CodrawStatus {
    guard(|| write(out, similarity(&borrow(truth, "truth")?.0, &borrow(pred, "pred")?.0)))
}

/// Intersection over union of the two scenes' type sets.
///
/// # Safety
/// Both scenes must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn codraw_iou(truth: *const CodrawScene, pred: *const CodrawScene, out: *mut f64) -> CodrawStatus {
    guard(|| write(out, iou(&borrow(truth, "truth")?.0, &borrow(pred, "pred")?.0)))
}

/// Character-level Levenshtein distance.
///
/// # Safety
/// `a` and `b` must be nul-terminated UTF-8; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn codraw_edit_distance(a: *const c_char, b: *const c_char, out: *mut usize) -> CodrawStatus {
    guard(|| write(out, edit_distance(text(a, "a")?, text(b, "b")?)))
}

/// Starts a game on `target` with the default rules. The target is copied.
///
/// # Safety
/// `scene_id` must be nul-terminated UTF-8, `target` a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn codraw_game_new(scene_id: *const c_char, target: *const CodrawScene, out: *mut *mut CodrawGame) -> CodrawStatus {
    guard(|| {
        let id = text(scene_id, "scene_id")?;
        let target = borrow(target, "target")?.0.clone();
        let game = GameState::new_session(id, target, GameConfig::default()).map_err(rejected)?;
        write(out, Box::into_raw(Box::new(CodrawGame(game))))
    })
}

fn rejected(e: codraw::engine::EngineError) -> Failure {
    Failure(CodrawStatus::Rejected, format!("{}: {e}", e.code()))
}

/// # Safety
/// `game` must be a live handle; `message` nul-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn codraw_game_send_message(game: *mut CodrawGame, role: CodrawRole, message: *const c_char) -> CodrawStatus {
    guard(|| borrow_mut(game, "game")?.0.submit_message(role.into(), text(message, "message")?).map_err(rejected))
}

/// Applies a drawer action given as JSON `{"adds": [...], "removes": [...], "edits": [...]}`.
///
/// # Safety
/// `game` must be a live handle; `action_json` nul-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn codraw_game_apply_action(game: *mut CodrawGame, action_json: *const c_char) -> CodrawStatus {
    guard(|| {
        let action: DrawerAction = json(text(action_json, "action_json")?, "action")?;
        borrow_mut(game, "game")?.0.submit_action(&action).map_err(rejected)
    })
}

/// The teller's single peek; writes a new scene handle holding the canvas.
///
/// # Safety
/// `game` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn codraw_game_peek(game: *mut CodrawGame, out: *mut *mut CodrawScene) -> CodrawStatus {
    guard(|| {
        let canvas = borrow_mut(game, "game")?.0.peek(Role::Teller).map_err(rejected)?;
        write(out, Box::into_raw(Box::new(CodrawScene(canvas))))
    })
}

/// Copy of the current canvas as a new scene handle.
///
/// # Safety
/// `game` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn codraw_game_canvas(game: *const CodrawGame, out: *mut *mut CodrawScene) -> CodrawStatus {
    guard(|| write(out, Box::into_raw(Box::new(CodrawScene(borrow(game, "game")?.0.canvas().clone())))))
}

/// Ends the game and writes the transcript as one JSON line; free it with
/// [`codraw_string_free`].
///
/// # Safety
/// `game` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn codraw_game_finish(game: *mut CodrawGame, out: *mut *mut c_char) -> CodrawStatus {
    guard(|| {
        let t = borrow_mut(game, "game")?.0.finish(Role::Teller).map_err(rejected)?;
        write(out, to_c_string(t.to_json_line()))
    })
}

/// # Safety
/// `game` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn codraw_game_free(game: *mut CodrawGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}
