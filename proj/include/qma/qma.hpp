#pragma once

#include "qma/errors.hpp"
#include "qma/parallel.hpp"
#include "qma/qform.hpp"
#include "qma/exterior.hpp"
#include "qma/random_forms.hpp"
#include "qma/torus.hpp"
#include "qma/field_io.hpp"
#include "qma/ma_operator.hpp"
#include "qma/krylov.hpp"
#include "qma/solver.hpp"
#include "qma/balanced.hpp"
#include "qma/identities.hpp"
#include "qma/config.hpp"
#include "qma/run.hpp"
