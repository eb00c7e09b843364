#ifndef SLQ_H
#define SLQ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlqStatus {
  SLQ_STATUS_OK = 0,
  SLQ_STATUS_NULL_ARGUMENT = 1,
  SLQ_STATUS_INVALID_UTF8 = 2,
  SLQ_STATUS_PARSE_ERROR = 3,
  SLQ_STATUS_INTERNAL_ERROR = 4,
  SLQ_STATUS_PANIC = 5,
} SlqStatus;

typedef enum SlqVerdict {
  SLQ_VERDICT_VALID = 0,
  SLQ_VERDICT_INVALID = 1,
  SLQ_VERDICT_SAT = 2,
  SLQ_VERDICT_UNSAT = 3,
} SlqVerdict;

/*
 Opaque parsed formula.
 */
typedef struct SlqFormula SlqFormula;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failure on this thread. The pointer stays
 valid until the next failing call on the same thread; do not free it.
 */
const char *slq_last_error(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must be null or a string obtained from this library, not yet freed.
 */
void slq_string_free(char *s);

/*
 Parses `text` into a new formula handle stored in `*out`.

 # Safety
 `text` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SlqStatus slq_formula_parse(const char *text, struct SlqFormula **out);

/*
 Releases a formula handle. Null is ignored.

 # Safety
 `f` must be null or a handle from [`slq_formula_parse`], not yet freed.
 */
void slq_formula_free(struct SlqFormula *f);

/*
 Prints a formula in the concrete syntax accepted by the parser.

 # Safety
 `f` must be a live handle and `out` a writable pointer.
 */
enum SlqStatus slq_formula_print(const struct SlqFormula *f, char **out);

/*
 Decides validity. When invalid and `countermodel` is non-null, a
 countermodel is written there in the form `store: x->0 ; heap: 0->1`;
 otherwise `*countermodel` is set to null.

 # Safety
 `f` must be a live handle, `verdict` writable, `countermodel` null or writable.
 */
enum SlqStatus slq_decide_valid(const struct SlqFormula *f,
                                enum SlqVerdict *verdict,
                                char **countermodel);

/*
 Decides satisfiability; the witness is reported like [`slq_decide_valid`]'s countermodel.

 # Safety
 `f` must be a live handle, `verdict` writable, `witness` null or writable.
 */
enum SlqStatus slq_decide_sat(const struct SlqFormula *f, enum SlqVerdict *verdict, char **witness);

/*
 Writes an equivalent Boolean combination of core formulas to `*out`.

 # Safety
 `f` must be a live handle and `out` a writable pointer.
 */
enum SlqStatus slq_normalize(const struct SlqFormula *f, char **out);

/*
 Checks a derivation given as proof-file text. `*accepted` is set to 1 when
 every step checks; otherwise 0, with the first failing step (1-based) in
 `*failing_step`. When `reason` is non-null it receives the checker's
 report. A malformed file yields `SLQ_STATUS_PARSE_ERROR`.

 # Safety
 `text` must be a NUL-terminated string; `accepted` and `failing_step`
 must be writable, `reason` null or writable.
 */
enum SlqStatus slq_check_proof(const char *text,
                               int32_t *accepted,
                               size_t *failing_step,
                               char **reason);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLQ_H */
