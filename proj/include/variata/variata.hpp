#pragma once

#include "variata/errors.hpp"
#include "variata/notation.hpp"
#include "variata/corpus_io.hpp"
#include "variata/similarity.hpp"
#include "variata/chain.hpp"
#include "variata/stylemodel.hpp"
#include "variata/sequencegraph.hpp"
#include "variata/stats.hpp"
#include "variata/variation.hpp"
#include "variata/structure.hpp"
#include "variata/harness.hpp"
