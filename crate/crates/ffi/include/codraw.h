#ifndef CODRAW_H
#define CODRAW_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum CodrawStatus {
  CODRAW_STATUS_OK = 0,
  CODRAW_STATUS_NULL_POINTER = 1,
  CODRAW_STATUS_INVALID_UTF8 = 2,
  CODRAW_STATUS_INVALID_JSON = 3,
  // A game rule rejected the call (wrong turn, over-length message, second peek, ...).
  CODRAW_STATUS_REJECTED = 4,
  CODRAW_STATUS_PANIC = 5,
} CodrawStatus;

typedef enum CodrawRole {
  CODRAW_ROLE_TELLER = 0,
  CODRAW_ROLE_DRAWER = 1,
} CodrawRole;

// Opaque game handle.
typedef struct CodrawGame CodrawGame;

// Opaque scene handle.
typedef struct CodrawScene CodrawScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *codraw_last_error(void);

// Library version as a static string.
const char *codraw_version(void);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void codraw_string_free(char *s);

// Parses a scene from its JSON list of pieces.
//
// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum CodrawStatus codraw_scene_from_json(const char *json_text, struct CodrawScene **out);

// Serializes a scene; free the result with [`codraw_string_free`].
//
// # Safety
// `scene` must be a live handle; `out` must be writable.
enum CodrawStatus codraw_scene_to_json(const struct CodrawScene *scene, char **out);

// Number of pieces, or 0 for a null handle.
//
// # Safety
// `scene` must be null or a live handle.
size_t codraw_scene_len(const struct CodrawScene *scene);

// # Safety
// `scene` must be null or a live handle; it is invalid afterwards.
void codraw_scene_free(struct CodrawScene *scene);

// Scene similarity with the default weights.
//
// # Safety
// Both scenes must be live handles; `out` must be writable.
enum CodrawStatus codraw_similarity(const struct CodrawScene *truth,
                                    const struct CodrawScene *pred,
                                    double *out);

// Intersection over union of the two scenes' type sets.
//
// # Safety
// Both scenes must be live handles; `out` must be writable.
enum CodrawStatus codraw_iou(const struct CodrawScene *truth,
                             const struct CodrawScene *pred,
                             double *out);

// Character-level Levenshtein distance.
//
// # Safety
// `a` and `b` must be nul-terminated UTF-8; `out` must be writable.
enum CodrawStatus codraw_edit_distance(const char *a, const char *b, size_t *out);

// Starts a game on `target` with the default rules. The target is copied.
//
// # Safety
// `scene_id` must be nul-terminated UTF-8, `target` a live handle, `out` writable.
enum CodrawStatus codraw_game_new(const char *scene_id,
                                  const struct CodrawScene *target,
                                  struct CodrawGame **out);

// # Safety
// `game` must be a live handle; `message` nul-terminated UTF-8.
enum CodrawStatus codraw_game_send_message(struct CodrawGame *game,
                                           enum CodrawRole role,
                                           const char *message);

// Applies a drawer action given as JSON `{"adds": [...], "removes": [...], "edits": [...]}`.
//
// # Safety
// `game` must be a live handle; `action_json` nul-terminated UTF-8.
enum CodrawStatus codraw_game_apply_action(struct CodrawGame *game, const char *action_json);

// The teller's single peek; writes a new scene handle holding the canvas.
//
// # Safety
// `game` must be a live handle; `out` writable.
enum CodrawStatus codraw_game_peek(struct CodrawGame *game, struct CodrawScene **out);

// Copy of the current canvas as a new scene handle.
//
// # Safety
// `game` must be a live handle; `out` writable.
enum CodrawStatus codraw_game_canvas(const struct CodrawGame *game, struct CodrawScene **out);

// Ends the game and writes the transcript as one JSON line; free it with
// [`codraw_string_free`].
//
// # Safety
// `game` must be a live handle; `out` writable.
enum CodrawStatus codraw_game_finish(struct CodrawGame *game, char **out);

// # Safety
// `game` must be null or a live handle; it is invalid afterwards.
void codraw_game_free(struct CodrawGame *game);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CODRAW_H */
