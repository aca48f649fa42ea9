#pragma once

#include "densift/causal.hpp"
#include "densift/cde.hpp"
#include "densift/cv_refine.hpp"
#include "densift/dataset.hpp"
#include "densift/dependence.hpp"
#include "densift/errors.hpp"
#include "densift/io.hpp"
#include "densift/kernels.hpp"
#include "densift/parallel.hpp"
#include "densift/rng.hpp"
#include "densift/screening.hpp"
#include "densift/simulate.hpp"
