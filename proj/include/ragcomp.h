/* C interface to the context-composition evaluation library.
 *
 * Every fallible call returns a ragc_status; 0 is success. On failure the
 * thread-local message from ragc_last_error() describes what went wrong.
 * Objects returned through out-parameters stay valid until passed to the
 * matching *_free function; strings returned through out-parameters must be
 * released with ragc_string_free.
 */
#ifndef RAGCOMP_H
#define RAGCOMP_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ragc_status {
  RAGC_OK = 0,
  RAGC_ERR_IO = 1,
  RAGC_ERR_PARSE = 2,
  RAGC_ERR_CONFIG = 3,
  RAGC_ERR_DATA_INTEGRITY = 4,
  RAGC_ERR_BOUNDS = 5,
  RAGC_ERR_LOOKUP = 6,
  RAGC_ERR_INSUFFICIENT_CANDIDATES = 7,
  RAGC_ERR_TRANSPORT = 8,
  RAGC_ERR_PROTOCOL = 9,
  RAGC_ERR_CONTRACT = 10,
  RAGC_ERR_STATE = 11,
  RAGC_ERR_INTERNAL = 12
} ragc_status;

const char* ragc_version(void);
const char* ragc_status_name(ragc_status status);

/* Message for the most recent failure on the calling thread ("" if none).
 * The pointer stays valid until the next failing call on the same thread. */
const char* ragc_last_error(void);

void ragc_string_free(char* s);

typedef struct ragc_corpus ragc_corpus;
typedef struct ragc_index ragc_index;

/* -- corpus ------------------------------------------------------------- */

/* Loads and validates a SQuAD v1.1 JSON file. */
ragc_status ragc_corpus_open_squad(const char* path, ragc_corpus** out);
/* Loads a corpus.jsonl dump produced by the ingest stage. */
ragc_status ragc_corpus_open_jsonl(const char* path, ragc_corpus** out);
void ragc_corpus_free(ragc_corpus* corpus);
size_t ragc_corpus_passage_count(const ragc_corpus* corpus);
size_t ragc_corpus_question_count(const ragc_corpus* corpus);

/* -- retrieval ---------------------------------------------------------- */

/* params_json may be NULL or a JSON object with any of
 * {"lowercase": bool, "k1": number, "b": number}. */
ragc_status ragc_index_build(const ragc_corpus* corpus, const char* params_json,
                             ragc_index** out);
ragc_status ragc_index_save(const ragc_index* index, const char* path);
ragc_status ragc_index_load(const char* path, ragc_index** out);
void ragc_index_free(ragc_index* index);
size_t ragc_index_doc_count(const ragc_index* index);

/* BM25 top-k as a JSON array [{"passage_id", "score", "rank"}, ...]. */
ragc_status ragc_index_search_json(const ragc_index* index, const char* query,
                                   size_t k, char** out_json);

/* -- answer metrics (SQuAD v1.1 comparison) ----------------------------- */

/* golds_json is a JSON array of gold answer strings. */
ragc_status ragc_normalize_answer(const char* text, char** out);
ragc_status ragc_exact_match(const char* prediction, const char* golds_json,
                             int* out);
ragc_status ragc_token_f1(const char* prediction, const char* golds_json,
                          double* out);
ragc_status ragc_answer_inclusion(const char* prediction,
                                  const char* golds_json, int* out);

/* -- pipeline stages ----------------------------------------------------
 * config_path names a run config JSON file; out_dir is the run directory.
 * Stages expect their upstream artifacts in out_dir and fail with
 * RAGC_ERR_STATE naming the stage to re-run when one is missing. */
ragc_status ragc_stage_ingest(const char* config_path, const char* out_dir);
ragc_status ragc_stage_index(const char* config_path, const char* out_dir);
ragc_status ragc_stage_build(const char* config_path, const char* out_dir);
ragc_status ragc_stage_run(const char* config_path, const char* out_dir);
ragc_status ragc_stage_analyze(const char* config_path, const char* out_dir);
ragc_status ragc_stage_report(const char* config_path, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* RAGCOMP_H */
