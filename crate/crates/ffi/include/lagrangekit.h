#ifndef LAGRANGEKIT_H
#define LAGRANGEKIT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum LkStatus {
  LK_STATUS_OK = 0,
  LK_STATUS_NULL_POINTER = 1,
  LK_STATUS_INVALID_ARGUMENT = 2,
  /*
   A NaN or infinity was produced or supplied.
   */
  LK_STATUS_NUMERICAL = 3,
  /*
   The oracle reported failure or returned inconsistent data.
   */
  LK_STATUS_EVALUATION = 4,
  LK_STATUS_SIGNATURE_MISMATCH = 5,
  LK_STATUS_CORRUPT_CHECKPOINT = 6,
  LK_STATUS_IO = 7,
  LK_STATUS_BUFFER_TOO_SMALL = 8,
  LK_STATUS_NOT_FOUND = 9,
  LK_STATUS_PANIC = 10,
} LkStatus;

typedef enum LkConstraintType {
  LK_CONSTRAINT_TYPE_INEQUALITY = 0,
  LK_CONSTRAINT_TYPE_EQUALITY = 1,
} LkConstraintType;

typedef enum LkFormulation {
  LK_FORMULATION_LAGRANGIAN = 0,
  LK_FORMULATION_AUGMENTED_LAGRANGIAN = 1,
  LK_FORMULATION_QUADRATIC_PENALTY = 2,
} LkFormulation;

typedef enum LkScheme {
  LK_SCHEME_SIMULTANEOUS = 0,
  LK_SCHEME_ALTERNATING_PRIMAL_DUAL = 1,
  LK_SCHEME_ALTERNATING_DUAL_PRIMAL = 2,
  LK_SCHEME_EXTRAGRADIENT = 3,
} LkScheme;

typedef enum LkPrimalKind {
  LK_PRIMAL_KIND_GD = 0,
  LK_PRIMAL_KIND_MOMENTUM = 1,
  LK_PRIMAL_KIND_ADAM = 2,
} LkPrimalKind;

typedef enum LkDualKind {
  LK_DUAL_KIND_GRADIENT_ASCENT = 0,
  LK_DUAL_KIND_NU_PI = 1,
} LkDualKind;

/*
 Evaluation sink passed to `LkEvaluateFn`.
 */
typedef struct LkEvaluation LkEvaluation;

/*
 Gradient sink passed to `LkGradientsFn`.
 */
typedef struct LkGradients LkGradients;

typedef struct LkOptimizer LkOptimizer;

typedef struct LkProblem LkProblem;

/*
 Optimizer settings. Fields that do not apply to the chosen kinds are
 ignored.
 */
typedef struct LkOptimizerConfig {
  enum LkScheme scheme;
  /*
   Non-zero: alternating primal-dual reuses the pre-step violations.
   */
  int reuse_violations;
  enum LkPrimalKind primal_kind;
  double lr_primal;
  double momentum;
  double beta1;
  double beta2;
  double eps;
  enum LkDualKind dual_kind;
  double lr_dual;
  double kp;
  double nu;
} LkOptimizerConfig;

/*
 Fills `out` with the loss and constraint violations at `x`. Return 0
 on success.
 */
typedef int (*LkEvaluateFn)(void *user_data, const double *x, size_t dim, struct LkEvaluation *out);

/*
 Fills `out` with the loss gradient and one gradient row per violation
 entry. Return 0 on success.
 */
typedef int (*LkGradientsFn)(void *user_data, const double *x, size_t dim, struct LkGradients *out);

typedef struct LkOracle {
  void *user_data;
  size_t dim;
  LkEvaluateFn evaluate;
  LkGradientsFn gradients;
} LkOracle;

typedef struct LkRollInfo {
  double loss;
  double primal_lagrangian;
  double dual_lagrangian;
} LkRollInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message on this thread into `buf` (NUL
 terminated, truncated to fit) and returns its full length in bytes.
 */
size_t lk_last_error_message(char *buf, size_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *lk_version(void);

enum LkStatus lk_problem_new(const double *x0, size_t dim, struct LkProblem **out);

void lk_problem_free(struct LkProblem *problem);

/*
 Registers a constraint group. `penalty` is the initial coefficient
 for penalized formulations and ignored for the plain Lagrangian.
 */
enum LkStatus lk_problem_add_group(struct LkProblem *problem,
                                   const char *id,
                                   enum LkConstraintType constraint_type,
                                   size_t size,
                                   enum LkFormulation formulation,
                                   double penalty);

size_t lk_problem_dim(const struct LkProblem *problem);

/*
 Copies the primal point into `out[0..len]`; `len` must equal the
 dimension.
 */
enum LkStatus lk_problem_x(const struct LkProblem *problem, double *out, size_t len);

/*
 Copies the multipliers of group `id` into `out[0..len]`.
 */
enum LkStatus lk_problem_multiplier(const struct LkProblem *problem,
                                    const char *id,
                                    double *out,
                                    size_t len);

/*
 A config with gradient descent, gradient ascent, the simultaneous
 scheme, learning rates 0.01 and the usual Adam/momentum constants.
 */
struct LkOptimizerConfig lk_optimizer_config_default(void);

enum LkStatus lk_optimizer_new(const struct LkOptimizerConfig *config, struct LkOptimizer **out);

void lk_optimizer_free(struct LkOptimizer *optimizer);

enum LkStatus lk_eval_set_loss(struct LkEvaluation *eval, double loss);

/*
 Records the violation of group `id` (`g(x)` or `h(x)`).
 */
enum LkStatus lk_eval_set_violation(struct LkEvaluation *eval,
                                    const char *id,
                                    const double *values,
                                    size_t len);

/*
 Records a strict (non-differentiable) measurement for group `id`; it
 drives the dual update while the violation drives the primal one.
 */
enum LkStatus lk_eval_set_strict_violation(struct LkEvaluation *eval,
                                           const char *id,
                                           const double *values,
                                           size_t len);

/*
 Marks which entries of group `id` the violation refers to.
 */
enum LkStatus lk_eval_set_indices(struct LkEvaluation *eval,
                                  const char *id,
                                  const size_t *indices,
                                  size_t len);

enum LkStatus lk_grad_set_loss(struct LkGradients *grads, const double *values, size_t len);

/*
 Records the gradient rows of group `id`, row-major `rows x dim`.
 */
enum LkStatus lk_grad_set_constraint(struct LkGradients *grads,
                                     const char *id,
                                     const double *values,
                                     size_t rows,
                                     size_t dim);

/*
 One optimizer step. On failure neither handle is modified. `info`
 may be null.
 */
enum LkStatus lk_roll(struct LkProblem *problem,
                      struct LkOptimizer *optimizer,
                      const struct LkOracle *oracle,
                      struct LkRollInfo *info);

/*
 Writes a checkpoint atomically.
 */
enum LkStatus lk_checkpoint_save(const struct LkProblem *problem,
                                 const struct LkOptimizer *optimizer,
                                 uint64_t step,
                                 const char *path);

/*
 Restores a checkpoint into existing handles built with the same
 groups and optimizer kinds. `step` (may be null) receives the saved
 step counter. Nothing is modified on failure.
 */
enum LkStatus lk_checkpoint_load(const char *path,
                                 struct LkProblem *problem,
                                 struct LkOptimizer *optimizer,
                                 uint64_t *step);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAGRANGEKIT_H */
