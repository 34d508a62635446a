#pragma once

// Umbrella header for the sub-action tree toolkit.

#include "hst/contrastive.hpp"
#include "hst/ctc.hpp"
#include "hst/error.hpp"
#include "hst/gradcheck.hpp"
#include "hst/io.hpp"
#include "hst/kmeans.hpp"
#include "hst/linalg.hpp"
#include "hst/path_search.hpp"
#include "hst/refine.hpp"
#include "hst/rng.hpp"
#include "hst/synth.hpp"
#include "hst/trainer.hpp"
#include "hst/tree.hpp"
#include "hst/types.hpp"
