#pragma once

// Umbrella header.

#include "genesim/config.hpp"
#include "genesim/data.hpp"
#include "genesim/error.hpp"
#include "genesim/eval.hpp"
#include "genesim/genetic.hpp"
#include "genesim/induce.hpp"
#include "genesim/random.hpp"
#include "genesim/space.hpp"
#include "genesim/tree.hpp"
#include "genesim/tree_io.hpp"
