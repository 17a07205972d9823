#ifndef ZKPOT_H
#define ZKPOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Encoded commitment length in bytes.
 */
#define ZKPOT_COMMITMENT_LEN 80

typedef enum ZkpotStatus {
  ZKPOT_STATUS_OK = 0,
  ZKPOT_STATUS_NULL_POINTER = 1,
  ZKPOT_STATUS_INVALID_ARGUMENT = 2,
  ZKPOT_STATUS_CONFIG = 3,
  ZKPOT_STATUS_IO = 4,
  ZKPOT_STATUS_LEDGER = 5,
  ZKPOT_STATUS_INVALID_CHAIN = 6,
  ZKPOT_STATUS_PROOF = 7,
  ZKPOT_STATUS_COMMITMENT = 8,
  ZKPOT_STATUS_SIMULATION = 9,
  ZKPOT_STATUS_PANIC = 10,
} ZkpotStatus;

/**
 * A chain loaded from a block log.
 */
typedef struct ZkpotChain ZkpotChain;

/**
 * A finished simulation run.
 */
typedef struct ZkpotSim ZkpotSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` as a NUL-terminated
 * string, truncating to `len - 1` bytes. Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t zkpot_last_error(char *buf, size_t len);

/**
 * Runs a simulation configured by a JSON object with `SimConfig` fields
 * (missing fields take their defaults) and checks the resulting chain.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be writable.
 */
enum ZkpotStatus zkpot_simulate(const char *config_json, struct ZkpotSim **out);

/**
 * # Safety
 * `sim` must be null or a handle from [`zkpot_simulate`] not yet freed.
 */
void zkpot_sim_free(struct ZkpotSim *sim);

/**
 * Number of completed rounds, 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t zkpot_sim_rounds(const struct ZkpotSim *sim);

/**
 * Blocks on the chain, genesis included.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t zkpot_sim_blocks(const struct ZkpotSim *sim);

/**
 * Test accuracy of the final global model, NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double zkpot_sim_final_accuracy(const struct ZkpotSim *sim);

/**
 * Leader of round `round` (1-based), or -1 when no leader was elected or the
 * round does not exist.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
int64_t zkpot_sim_leader(const struct ZkpotSim *sim, size_t round);

/**
 * # Safety
 * `sim` must be a live handle; `out` must point to 32 writable bytes.
 */
enum ZkpotStatus zkpot_sim_tip_hash(const struct ZkpotSim *sim, uint8_t *out);

/**
 * Writes the chain as a block log readable by [`zkpot_chain_read_log`].
 *
 * # Safety
 * `sim` must be a live handle; `path` a NUL-terminated string.
 */
enum ZkpotStatus zkpot_sim_write_chain_log(const struct ZkpotSim *sim, const char *path);

/**
 * Parses a block log. Only structural checks run here; see
 * [`zkpot_chain_validate`] for signatures and linkage.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ZkpotStatus zkpot_chain_read_log(const char *path, struct ZkpotChain **out);

/**
 * Same as [`zkpot_chain_read_log`] over an in-memory log.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum ZkpotStatus zkpot_chain_from_bytes(const uint8_t *data, size_t len, struct ZkpotChain **out);

/**
 * # Safety
 * `chain` must be null or a handle not yet freed.
 */
void zkpot_chain_free(struct ZkpotChain *chain);

/**
 * # Safety
 * `chain` must be null or a live handle.
 */
size_t zkpot_chain_len(const struct ZkpotChain *chain);

/**
 * # Safety
 * `chain` must be a live handle; `out` must point to 32 writable bytes.
 */
enum ZkpotStatus zkpot_chain_tip_hash(const struct ZkpotChain *chain, uint8_t *out);

/**
 * Checks linkage, Merkle roots, seals and transaction signatures against the
 * keys a simulation with `seed` and `nodes` nodes hands out.
 *
 * # Safety
 * `chain` must be a live handle.
 */
enum ZkpotStatus zkpot_chain_validate(const struct ZkpotChain *chain,
                                      uint64_t seed,
                                      uint32_t nodes);

/**
 * Commits to `model[..len]` with the 32-byte opening and writes the encoded
 * commitment (`ZKPOT_COMMITMENT_LEN` bytes) to `out`.
 *
 * # Safety
 * `model` must point to `len` readable bytes, `opening` to 32, `out` to
 * `ZKPOT_COMMITMENT_LEN` writable bytes.
 */
enum ZkpotStatus zkpot_commit(const uint8_t *model,
                              size_t len,
                              const uint8_t *opening,
                              uint8_t *out);

/**
 * Sets `*valid` to whether the commitment opens to `model` under `opening`.
 * A malformed commitment encoding is an error, a wrong opening is not.
 *
 * # Safety
 * `commitment` must point to `ZKPOT_COMMITMENT_LEN` readable bytes, `model` to
 * `len`, `opening` to 32; `valid` must be writable.
 */
enum ZkpotStatus zkpot_commitment_verify(const uint8_t *commitment,
                                         const uint8_t *model,
                                         size_t len,
                                         const uint8_t *opening,
                                         bool *valid);

/**
 * Derives a canonical opening scalar from arbitrary seed bytes.
 *
 * # Safety
 * `seed` must point to `len` readable bytes, `out` to 32 writable bytes.
 */
enum ZkpotStatus zkpot_opening_from_seed(const uint8_t *seed, size_t len, uint8_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZKPOT_H */
