#pragma once

#include "diacritize/ambiguity.hpp"
#include "diacritize/checksum.hpp"
#include "diacritize/corpus.hpp"
#include "diacritize/error.hpp"
#include "diacritize/eval.hpp"
#include "diacritize/model/checkpoint.hpp"
#include "diacritize/model/config.hpp"
#include "diacritize/model/decode.hpp"
#include "diacritize/model/seq2seq.hpp"
#include "diacritize/model/vocab.hpp"
#include "diacritize/neural/grad_check.hpp"
#include "diacritize/neural/matrix.hpp"
#include "diacritize/neural/optim.hpp"
#include "diacritize/neural/tape.hpp"
#include "diacritize/random.hpp"
#include "diacritize/run_config.hpp"
#include "diacritize/toy.hpp"
#include "diacritize/trainer.hpp"
#include "diacritize/unicode.hpp"
