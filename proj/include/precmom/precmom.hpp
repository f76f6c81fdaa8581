#pragma once

// Umbrella header: the whole library in one include.

#include "precmom/cli.hpp"
#include "precmom/dataio.hpp"
#include "precmom/errors.hpp"
#include "precmom/format.hpp"
#include "precmom/objective.hpp"
#include "precmom/optimizer.hpp"
#include "precmom/preconditioner.hpp"
#include "precmom/rng.hpp"
#include "precmom/suite.hpp"
#include "precmom/vectors.hpp"
#include "precmom/verify.hpp"
