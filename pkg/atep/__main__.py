from atep.main import main

raise SystemExit(main())
