#pragma once

#include "afd/distributions.hpp"
#include "afd/effects.hpp"
#include "afd/errors.hpp"
#include "afd/estimation.hpp"
#include "afd/likelihood.hpp"
#include "afd/model.hpp"
#include "afd/parallel.hpp"
#include "afd/prior.hpp"
#include "afd/roots.hpp"
#include "afd/scores.hpp"
#include "afd/simulation.hpp"
#include "afd/spectral.hpp"
#include "afd/types.hpp"
#include "afd/version.hpp"
